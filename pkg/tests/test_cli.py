import csv
import json
import math
import subprocess
import sys

import pytest

from gapbound.cli import main
from gapbound.config import ExperimentConfig, build_config, validate
from gapbound.errors import ConfigError

HEADER = "t,epsilon,bound,term_S,term_L,term_SH1"


def run_cli(*argv):
    return main(list(argv))


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_two_level_run(tmp_path, capsys):
    code = run_cli("run", "two_level", "--delta0", "10", "--omega", "1", "--t-end", "4",
                   "--n-points", "400", "--out-dir", str(tmp_path))
    out = capsys.readouterr().out
    assert code == 0, out
    assert "FAIL" not in out
    csv_path = tmp_path / "two_level.csv"
    assert csv_path.read_text().splitlines()[0] == HEADER
    rows = read_rows(csv_path)[1:]
    assert len(rows) == 400
    for row in rows:
        assert len(row) == 6
        for cell in row:
            assert cell != "" and math.isfinite(float(cell))
    summary = json.loads((tmp_path / "two_level_summary.json").read_text())
    assert summary["schema_version"] == 1
    assert summary["ok"] and summary["failures"] == []
    names = {c["name"] for c in summary["certificates"]}
    assert {"weyl_gap", "sylvester_residual", "generator_norm", "remainder_norm",
            "asymptotic_bound", "rewrite_identity", "triangle_decomposition"} <= names
    assert summary["norms"]["norm_V"] == pytest.approx(0.5)
    assert summary["norms"]["delta0"] == pytest.approx(10.0)
    assert summary["findings"]["jump_time"] <= math.pi / math.sqrt(101)


def test_missing_field(tmp_path, capsys):
    code = run_cli("run", "two_level", "--omega", "1", "--out-dir", str(tmp_path))
    err = capsys.readouterr().err
    assert code == 1
    assert "delta0" in err
    with pytest.raises(ConfigError, match="delta0"):
        build_config({"experiment": "two_level", "omega": 1.0})


def test_unknown_key():
    with pytest.raises(ConfigError, match="frobnicate"):
        ExperimentConfig.from_dict({"experiment": "two_level", "frobnicate": 1})


def test_validate_diagnostics():
    ok = ExperimentConfig.from_dict({"experiment": "two_level", "delta0": 10, "omega": 1})
    assert validate(ok) == []
    big = ExperimentConfig.from_dict({"experiment": "pxp", "L": 20, "omega": 2, "delta0": 100})
    diags = validate(big)
    assert any(d.level == "error" and d.field == "L" and "budget" in d.message for d in diags)
    weak = ExperimentConfig.from_dict({"experiment": "two_level", "delta0": 3, "omega": 2})
    diags = validate(weak)
    assert [d.level for d in diags] == ["warning"]
    assert diags[0].message == "Δ₀ < 10‖V‖: asymptotic bound checks disabled"
    neg = ExperimentConfig.from_dict({"experiment": "two_level", "delta0": -1, "omega": 1})
    assert any(d.field == "delta0" for d in validate(neg))


def test_validate_command(capsys):
    assert run_cli("validate", "two_level", "--delta0", "10", "--omega", "1") == 0
    assert capsys.readouterr().out.strip() == "ok"
    assert run_cli("validate", "pxp", "--L", "20", "--omega", "2", "--delta0", "100") == 1
    assert "budget" in capsys.readouterr().out


def test_list_experiments(capsys):
    assert run_cli("list-experiments") == 0
    out = capsys.readouterr().out
    for name in ("two_level", "four_level", "random_banded", "pxp"):
        assert name in out


def test_weak_gap_run_skips_bound(tmp_path, capsys):
    code = run_cli("run", "two_level", "--delta0", "3", "--omega", "2", "--out-dir", str(tmp_path))
    assert code == 0
    rows = read_rows(tmp_path / "two_level.csv")
    # bound column is left empty outside the regime
    assert all(r[2] == "" for r in rows[1:])
    summary = json.loads((tmp_path / "two_level_summary.json").read_text())
    cert = {c["name"]: c for c in summary["certificates"]}["asymptotic_bound"]
    assert cert["applicable"] is False


def test_random_banded_deterministic(tmp_path):
    outs = []
    for k in range(2):
        d = tmp_path / f"r{k}"
        assert run_cli("run", "random_banded", "--seed", "7", "--out-dir", str(d)) == 0
        outs.append((d / "random_banded.csv").read_bytes())
    assert outs[0] == outs[1]
    assert len(outs[0].decode().splitlines()) == 802


def test_config_file_with_override(tmp_path):
    cfg = tmp_path / "exp.toml"
    cfg.write_text('experiment = "four_level"\ndelta0 = 10.0\nomega = 1.0\n'
                   "[grid]\nt_end = 5.0\nn_points = 60\n")
    out = tmp_path / "out"
    assert run_cli("run", "--config", str(cfg), "--n-points", "30", "--out-dir", str(out)) == 0
    rows = read_rows(out / "four_level.csv")
    assert len(rows) == 31
    assert float(rows[-1][0]) == 5.0


def test_malformed_config(tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("experiment = \n")
    assert run_cli("run", "--config", str(cfg)) == 1
    assert run_cli("run", "--config", str(tmp_path / "missing.toml")) == 1


def test_certificate_failure_exit_code(tmp_path, monkeypatch, capsys):
    import gapbound.runner as runner
    from gapbound.swt import Certificate

    monkeypatch.setattr(runner, "check_asymptotic_bound",
                        lambda *a, **k: Certificate("asymptotic_bound", 2.0, 1.0, False))
    code = run_cli("run", "two_level", "--delta0", "10", "--omega", "1", "--out-dir", str(tmp_path))
    assert code == 2
    assert "asymptotic_bound" in capsys.readouterr().err
    summary = json.loads((tmp_path / "two_level_summary.json").read_text())
    assert summary["ok"] is False
    assert summary["failures"] == ["asymptotic_bound"]


def test_pxp_small_run(tmp_path):
    code = run_cli("run", "pxp", "--L", "6", "--omega", "2", "--delta0-log10", "1.0,1.5,2.0,2.5",
                   "--t-end", "3", "--n-points", "61", "--out-dir", str(tmp_path))
    assert code == 0
    csvs = sorted(tmp_path.glob("pxp_L6_*.csv"))
    assert len(csvs) == 4
    for p in csvs:
        rows = read_rows(p)
        assert rows[0] == HEADER.split(",")
        assert len(rows) == 62
    summary = json.loads((tmp_path / "pxp_summary.json").read_text())
    assert "collapse" in summary["findings"]
    assert summary["norms"]["band_dim"] == 21
    assert summary["norms"]["norm_V_local"] == pytest.approx(1.0)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "gapbound", "list-experiments"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert "pxp" in proc.stdout
