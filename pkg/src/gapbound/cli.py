"""Command-line front end: ``gapbound run|validate|list-experiments``.

Times are in units where hbar = 1 and energies are as configured.
Exit codes: 0 success, 1 config error, 2 certificate failure, 3 numerical error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from .config import EXPERIMENTS, ExperimentConfig, build_config, load_config, merge, validate
from .errors import ConfigError, GapBoundError

EXIT_OK, EXIT_CONFIG, EXIT_CERTIFICATE, EXIT_NUMERICAL = 0, 1, 2, 3

log = logging.getLogger("gapbound")


def thread_budget() -> int:
    env = os.environ.get("GAPBOUND_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"GAPBOUND_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_model_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="TOML config file; flags override its values")
    g = p.add_argument_group("model")
    g.add_argument("--delta0", type=float, help="bare gap delta0 (energy)")
    g.add_argument("--delta0-log10", type=_float_list, dest="delta0_log10",
                   help="comma-separated log10(delta0) sweep (pxp)")
    g.add_argument("--omega", type=float, help="Rabi frequency")
    g.add_argument("--seed", type=int, help="PRNG seed (random_banded)")
    g.add_argument("--L", type=int, dest="L", help="chain length (pxp, <= 14)")
    g.add_argument("--n-bands", type=int, dest="n_bands")
    g.add_argument("--levels-per-band", type=int, dest="levels_per_band")
    g.add_argument("--gap-ratio", type=float, dest="gap_ratio",
                   help="nominal band gap in units of ||V|| (random_banded)")
    g.add_argument("--width", type=float, help="in-band level spread (random_banded)")
    g = p.add_argument_group("grid and band")
    g.add_argument("--t-end", type=float, dest="t_end", help="final time (1/energy units)")
    g.add_argument("--n-points", type=int, dest="n_points")
    g.add_argument("--band-kind", choices=("index_range", "energy_window", "zero_subspace"))
    g.add_argument("--band-lo", type=float)
    g.add_argument("--band-hi", type=float)
    g = p.add_argument_group("checks and output")
    g.add_argument("--out-dir", dest="out_dir", help="directory for CSV/JSON artifacts")
    g.add_argument("--bound-slack", type=float, dest="bound_slack")
    g.add_argument("--horizon-factor", type=float, dest="horizon_factor")
    g.add_argument("--remainder-slack", type=float, dest="remainder_slack")
    g.add_argument("--fit-window", type=_float_list, dest="fit_window", help="t_lo,t_hi (pxp)")
    g.add_argument("--decompose", action=argparse.BooleanOptionalAction, default=None,
                   help="compute the triangle-decomposition terms (default: dim <= 512)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gapbound",
        description="Error between full and band-constrained dynamics in gapped systems. "
                    "Times are in units with hbar = 1; energies as configured.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment and write CSV/JSON artifacts")
    p_run.add_argument("experiment", nargs="?", choices=sorted(EXPERIMENTS))
    _add_model_flags(p_run)
    p_val = sub.add_parser("validate", help="report config problems without running")
    p_val.add_argument("experiment", nargs="?", choices=sorted(EXPERIMENTS))
    _add_model_flags(p_val)
    sub.add_parser("list-experiments", help="list available experiments")
    return parser


def config_from_args(args: argparse.Namespace) -> dict:
    base = load_config(args.config) if args.config else {}
    overrides = {
        name: getattr(args, name)
        for name in ("experiment", "delta0", "delta0_log10", "omega", "seed", "L", "n_bands",
                     "levels_per_band", "gap_ratio", "width", "out_dir", "bound_slack",
                     "horizon_factor", "remainder_slack", "fit_window", "decompose")
    }
    overrides["grid"] = {"t_end": args.t_end, "n_points": args.n_points}
    overrides["band"] = {"kind": args.band_kind, "lo": args.band_lo, "hi": args.band_hi}
    return merge(base, overrides)


def _cmd_run(args) -> int:
    from threadpoolctl import threadpool_limits

    from .runner import run

    cfg = build_config(config_from_args(args))
    for diag in validate(cfg):
        log.warning("%s", diag)
    threads = thread_budget()
    # few-level runs parallelize over grid points, the chain over BLAS
    blas = threads if cfg.experiment == "pxp" else 1
    with threadpool_limits(limits=blas):
        summary = run(cfg, workers=threads)
    for cert in summary.certificates:
        state = "n/a " if not cert.applicable else ("PASS" if cert.holds else "FAIL")
        print(f"{state} {cert.name}: lhs={cert.lhs:.6g} rhs={cert.rhs:.6g} {cert.note}".rstrip())
    for path in summary.artifacts:
        print(f"wrote {path}")
    if not summary.ok:
        print("certificate failures: " + ",".join(c.name for c in summary.failures), file=sys.stderr)
        return EXIT_CERTIFICATE
    return EXIT_OK


def _cmd_validate(args) -> int:
    raw = config_from_args(args)
    cfg = ExperimentConfig.from_dict(raw)
    diags = validate(cfg)
    for diag in diags:
        print(diag)
    if any(d.level == "error" for d in diags):
        return EXIT_CONFIG
    if not diags:
        print("ok")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "list-experiments":
            for name, text in EXPERIMENTS.items():
                print(f"{name:15s} {text}")
            return EXIT_OK
        if args.command == "validate":
            return _cmd_validate(args)
        return _cmd_run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GapBoundError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
