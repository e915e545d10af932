"""Run one configured experiment and write its CSV traces and JSON summary."""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .banding import band_partition, block_spectral_gap, detect_band
from .config import DECOMPOSE_MAX_DIM, ExperimentConfig
from .dynamics import (
    ErrorTrace,
    TimeGrid,
    asymptotic_bound,
    check_asymptotic_bound,
    error_decomposition,
    error_trace,
    jump_time,
)
from .errors import GapBoundError, RegimeViolation
from .linalg import eig_hermitian, operator_norm
from .manybody import fit_growth, lr_transition_time, rescaled_collapse, run_pxp_experiment
from .models import build_four_level, build_random_banded, build_two_level
from .swt import (
    Certificate,
    certify_generator,
    certify_remainder,
    schrieffer_wolff,
    series_tail_bound,
    v_prime_series,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
CSV_COLUMNS = ("t", "epsilon", "bound", "term_S", "term_L", "term_SH1")
SERIES_ORDER = 20


@dataclass
class RunSummary:
    experiment: str
    certificates: list[Certificate] = field(default_factory=list)
    norms: dict[str, float] = field(default_factory=dict)
    fits: dict[str, Any] = field(default_factory=dict)
    findings: dict[str, Any] = field(default_factory=dict)
    artifacts: list[str] = field(default_factory=list)
    config: dict[str, Any] = field(default_factory=dict)
    wall_clock: float = 0.0
    traces: list[ErrorTrace] = field(default_factory=list, repr=False)

    @property
    def failures(self) -> list[Certificate]:
        return [c for c in self.certificates if c.applicable and not c.holds]

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "gapbound_version": __version__,
            "experiment": self.experiment,
            "ok": self.ok,
            "failures": [c.name for c in self.failures],
            "certificates": [c.to_dict() for c in self.certificates],
            "norms": self.norms,
            "fits": self.fits,
            "findings": self.findings,
            "artifacts": self.artifacts,
            "wall_clock_s": self.wall_clock,
            "config": self.config,
        }


def _fmt(x) -> str:
    if x is None:
        return ""
    x = float(x)
    if not math.isfinite(x):
        return ""
    return format(x, ".17g")


def write_trace_csv(trace: ErrorTrace, path: Path) -> Path:
    """CSV with header ``t,epsilon,bound,term_S,term_L,term_SH1``; missing columns stay empty."""
    cols = [trace.times, trace.epsilon, trace.bound, trace.term_S, trace.term_L, trace.term_SH1]
    lines = [",".join(CSV_COLUMNS)]
    for i in range(trace.n_points):
        lines.append(",".join(_fmt(c[i]) if c is not None else "" for c in cols))
    path.write_text("\n".join(lines) + "\n")
    return path


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj)!r}")


def _clean(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


def write_summary(summary: RunSummary, path: Path) -> Path:
    payload = _clean(json.loads(json.dumps(summary.to_dict(), default=_json_default)))
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def _build_few_body(cfg: ExperimentConfig):
    if cfg.experiment == "two_level":
        return build_two_level(cfg.delta0, cfg.omega)
    if cfg.experiment == "four_level":
        return build_four_level(cfg.delta0, cfg.omega)
    return build_random_banded(cfg.seed, cfg.n_bands, cfg.levels_per_band, cfg.gap_ratio, cfg.width)


def _trace_checks(trace: ErrorTrace, norm_T: float, norm_Vp: float) -> list[Certificate]:
    eps, tS, tL, tSH1 = trace.epsilon, trace.term_S, trace.term_L, trace.term_SH1
    tri = float(np.max(eps - (tS + tL + tSH1)))
    return [
        Certificate("rewrite_identity", trace.metadata["rewrite_defect"], 1e-8,
                    trace.metadata["rewrite_defect"] <= 1e-8),
        Certificate("triangle_decomposition", tri, 1e-9, tri <= 1e-9,
                    note="max of eps - (term_S + term_L + term_SH1)"),
        Certificate("conjugation_bound_S", float(tS.max()), 2 * norm_T, float(tS.max()) <= 2 * norm_T + 1e-9),
        Certificate("conjugation_bound_SH1", float(tSH1.max()), 2 * norm_T,
                    float(tSH1.max()) <= 2 * norm_T + 1e-9),
        Certificate("loschmidt_bound", float(np.max(tL - 2 * norm_Vp * trace.times)), 1e-9,
                    bool(np.all(tL <= 2 * norm_Vp * trace.times + 1e-9)),
                    note="max of term_L - 2||V'||t"),
    ]


def run_few_body(cfg: ExperimentConfig, out_dir: Path, workers: int | None = None) -> RunSummary:
    summary = RunSummary(cfg.experiment, config=cfg.to_dict())
    model = _build_few_body(cfg)
    if cfg.band is not None:
        model.band = cfg.band
    spec = eig_hermitian(model.H0)
    partition = band_partition(spec, detect_band(spec, model.band), model.V)
    norm_V = model.norm_V()
    delta0 = partition.delta0
    t_end, n_points = cfg.grid_spec()
    grid = TimeGrid(0.0, t_end, n_points)

    gap = block_spectral_gap(model.H.matrix - partition.blocks["V_off"], partition, norm_V)
    summary.certificates.append(Certificate("weyl_gap", gap.weyl_lower, gap.delta, gap.satisfied,
                                            note="delta >= delta0 - 2||V||"))
    swt = schrieffer_wolff(model.H, partition, norm_V)
    summary.certificates.append(Certificate("sylvester_residual", swt.residual, 1e-10 * norm_V,
                                            swt.residual <= 1e-10 * max(norm_V, 1e-14)))
    summary.certificates.append(certify_generator(swt))
    series = v_prime_series(swt.T, partition.blocks["V_off"], SERIES_ORDER)
    series_gap = operator_norm(series - swt.V_prime)
    tail = series_tail_bound(swt.norm_T, operator_norm(partition.blocks["V_off"]), SERIES_ORDER)
    summary.certificates.append(Certificate("remainder_series", series_gap, tail + 1e-10,
                                            series_gap <= tail + 1e-10, note=f"N={SERIES_ORDER}"))
    try:
        summary.certificates.append(certify_remainder(swt, delta0, norm_V, cfg.remainder_slack))
    except RegimeViolation as exc:
        summary.certificates.append(Certificate("remainder_norm", swt.norm_V_prime, math.nan, True,
                                                applicable=False, note=str(exc)))

    decompose = cfg.decompose if cfg.decompose is not None else model.dim <= DECOMPOSE_MAX_DIM
    if decompose:
        trace = error_decomposition(model, partition, swt, grid, workers=workers)
        summary.certificates.extend(_trace_checks(trace, swt.norm_T, swt.norm_V_prime))
    else:
        trace = error_trace(model, partition, grid, workers=workers)

    curve = asymptotic_bound(norm_V, delta0, grid)
    if curve.in_regime:
        trace.bound = curve.values
    summary.certificates.append(check_asymptotic_bound(trace, norm_V, delta0, cfg.bound_slack,
                                                       cfg.horizon_factor))
    try:
        summary.findings["jump_time"] = jump_time(trace, delta0)
        summary.findings["jump_time_over_2pi_delta0"] = summary.findings["jump_time"] * delta0 / (2 * np.pi)
    except GapBoundError as exc:
        summary.findings["jump_time"] = None
        summary.findings["jump_time_note"] = str(exc)
    summary.findings["epsilon_max"] = float(trace.epsilon.max())
    summary.norms = {
        "norm_V": norm_V, "norm_T": swt.norm_T, "norm_V_prime": swt.norm_V_prime,
        "norm_PVQ": swt.norm_PVQ, "delta0": delta0, "delta": gap.delta,
        "delta_u": partition.delta_u, "delta_d": partition.delta_d,
        "bound_intercept": curve.intercept, "bound_slope": curve.slope,
        "bound_horizon": curve.horizon, "band_dim": partition.rank,
    }
    trace.metadata.update(summary.norms)
    summary.traces.append(trace)
    summary.artifacts.append(str(write_trace_csv(trace, out_dir / f"{cfg.experiment}.csv")))
    return summary


def run_pxp(cfg: ExperimentConfig, out_dir: Path, workers: int | None = 1) -> RunSummary:
    summary = RunSummary("pxp", config=cfg.to_dict())
    t_end, n_points = cfg.grid_spec()
    grid = TimeGrid(0.0, t_end, n_points)
    d0_values = cfg.delta0_values()
    traces = run_pxp_experiment(cfg.L, cfg.omega, d0_values, grid, workers=workers)
    labels = ([f"log10d0_{x:.2f}" for x in cfg.delta0_log10] if cfg.delta0_log10
              else [f"d0_{d:g}" for d in d0_values])
    fits = {}
    for label, d0, trace in zip(labels, d0_values, traces):
        try:
            t_star = lr_transition_time(trace)
        except GapBoundError as exc:
            t_star = None
            log.info("no transition for delta0=%g: %s", d0, exc)
        if cfg.fit_window is not None:
            window = tuple(cfg.fit_window)
        else:
            window = (10 * np.pi / d0, 0.8 * t_star if t_star else grid.t_end)
        entry: dict[str, Any] = {"delta0": d0, "t_star": t_star,
                                 "omega_t_star": cfg.omega * t_star if t_star else None}
        try:
            fit = fit_growth(trace, window)
            entry.update(fit.to_dict())
            entry["c2_times_delta0"] = fit.quadratic["c2"] * d0
        except GapBoundError as exc:
            entry["fit_error"] = str(exc)
        fits[label] = entry
        path = out_dir / f"pxp_L{cfg.L}_{label}.csv"
        summary.artifacts.append(str(write_trace_csv(trace, path)))
    summary.fits = fits
    summary.traces = traces
    if len(traces) >= 2:
        collapse = rescaled_collapse(traces)
        summary.findings["collapse"] = collapse.to_dict()
        scaled = [f["c2_times_delta0"] for f in fits.values() if "c2_times_delta0" in f]
        if scaled and min(scaled) > 0:
            summary.findings["c2_delta0_ratio"] = max(scaled) / min(scaled)
    meta = traces[0].metadata
    summary.norms = {"norm_V": meta["norm_V"], "norm_V_local": meta["norm_V_local"],
                     "band_dim": meta["band_dim"], "lattice_dim": meta["lattice_dim"]}
    summary.findings["quadratic_preferred"] = {k: f.get("preferred") == "quadratic" for k, f in fits.items()}
    return summary


def run(cfg: ExperimentConfig, workers: int | None = None) -> RunSummary:
    """Run ``cfg``, write its artifacts into ``cfg.out_dir`` and return the summary."""
    start = time.perf_counter()
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if cfg.experiment == "pxp":
        summary = run_pxp(cfg, out_dir, workers=1)
    else:
        summary = run_few_body(cfg, out_dir, workers=workers)
    summary.wall_clock = time.perf_counter() - start
    summary_path = out_dir / f"{cfg.experiment}_summary.json"
    summary.artifacts.append(str(summary_path))
    write_summary(summary, summary_path)
    return summary
