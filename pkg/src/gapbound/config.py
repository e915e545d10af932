"""Experiment configuration: TOML loading, command-line overrides and validation.

A config file is flat TOML with two optional tables::

    experiment = "two_level"
    delta0 = 10.0
    omega = 1.0

    [grid]
    t_end = 4.0
    n_points = 400

    [band]
    kind = "index_range"   # or "energy_window", "zero_subspace"
    lo = 0
    hi = 0
"""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any

from .banding import BandSelector
from .errors import ConfigError
from .models import MAX_CHAIN_LENGTH

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXPERIMENTS = {
    "two_level": "driven two-level atom, ground-state band, O = sigma^x",
    "four_level": "two atoms with one driven, single-excitation band, swap observable",
    "random_banded": "random banded H0 with GUE perturbation and observable, middle band",
    "pxp": "PXP parent chain, blockaded band, O = sigma^y on site 1, delta0 sweep",
}

REQUIRED = {
    "two_level": ("delta0", "omega"),
    "four_level": ("delta0", "omega"),
    "random_banded": ("seed",),
    "pxp": ("L", "omega"),
}

DEFAULT_GRID = {
    "two_level": (4.0, 400),
    "four_level": (20.0, 400),
    "random_banded": (4.0, 801),
}

# dense full-space decomposition terms are skipped above this dimension
DECOMPOSE_MAX_DIM = 512


@dataclass
class Diagnostic:
    level: str  # "error" or "warning"
    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.level}: {self.field}: {self.message}"


@dataclass
class ExperimentConfig:
    experiment: str
    delta0: float | None = None
    omega: float | None = None
    seed: int | None = None
    L: int | None = None
    n_bands: int = 3
    levels_per_band: int = 4
    gap_ratio: float = 10.0
    width: float = 1.0
    delta0_log10: list[float] | None = None
    t_end: float | None = None
    n_points: int | None = None
    band: BandSelector | None = None
    out_dir: str = "gapbound_out"
    bound_slack: float = 8.0
    horizon_factor: float = 0.1
    remainder_slack: float = 4.0
    fit_window: list[float] | None = None
    decompose: bool | None = None

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "ExperimentConfig":
        data = dict(raw)
        grid = data.pop("grid", None) or {}
        if not isinstance(grid, dict):
            raise ConfigError("'grid' must be a table with t_end and n_points")
        unknown_grid = set(grid) - {"t_end", "n_points"}
        if unknown_grid:
            raise ConfigError(f"unknown grid keys: {sorted(unknown_grid)}")
        for key in ("t_end", "n_points"):
            if key in grid and data.get(key) is None:
                data[key] = grid[key]
        band = data.pop("band", None)
        if isinstance(band, dict):
            data["band"] = BandSelector.from_dict(band)
        elif band is not None and not isinstance(band, BandSelector):
            raise ConfigError("'band' must be a table with kind/lo/hi")
        else:
            data["band"] = band
        if "experiment" not in data or data["experiment"] is None:
            raise ConfigError("missing required field 'experiment'")
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**{k: v for k, v in data.items() if v is not None})
        cfg._coerce()
        return cfg

    def _coerce(self):
        try:
            for name in ("delta0", "omega", "gap_ratio", "width", "t_end",
                         "bound_slack", "horizon_factor", "remainder_slack"):
                value = getattr(self, name)
                if value is not None:
                    setattr(self, name, float(value))
            for name in ("seed", "L", "n_bands", "levels_per_band", "n_points"):
                value = getattr(self, name)
                if value is not None:
                    if isinstance(value, float) and not value.is_integer():
                        raise ConfigError(f"{name} must be an integer, got {value!r}")
                    setattr(self, name, int(value))
            if self.delta0_log10 is not None:
                if isinstance(self.delta0_log10, (int, float)):
                    self.delta0_log10 = [self.delta0_log10]
                self.delta0_log10 = [float(x) for x in self.delta0_log10]
            if self.fit_window is not None:
                self.fit_window = [float(x) for x in self.fit_window]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid numeric field: {exc}") from exc

    def grid_spec(self) -> tuple[float, int]:
        if self.experiment == "pxp":
            # Omega t in [0, 24] at Omega dt = 0.15: past the changepoint near Omega t ~ 12
            omega = self.omega or 1.0
            t_end, n = 24.0 / omega, 161
        else:
            t_end, n = DEFAULT_GRID.get(self.experiment, (4.0, 400))
        return (self.t_end if self.t_end is not None else t_end,
                self.n_points if self.n_points is not None else n)

    def delta0_values(self) -> list[float]:
        if self.delta0_log10:
            return [10.0**x for x in self.delta0_log10]
        return [self.delta0] if self.delta0 is not None else []

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["band"] = self.band.to_dict() if self.band is not None else None
        out["grid"] = dict(zip(("t_end", "n_points"), self.grid_spec()))
        return out


def load_config(path: str | Path) -> dict[str, Any]:
    """Read a TOML config file into a plain dict."""
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc


def merge(base: dict[str, Any], overrides: dict[str, Any]) -> dict[str, Any]:
    """Overlay non-None ``overrides`` on ``base``; grid/band keys merge one level deep."""
    out = dict(base)
    for key, value in overrides.items():
        if value is None:
            continue
        if key in ("grid", "band") and isinstance(value, dict):
            inner = dict(out.get(key) or {})
            inner.update({k: v for k, v in value.items() if v is not None})
            if inner:
                out[key] = inner
        else:
            out[key] = value
    return out


def _regime_norm(cfg: ExperimentConfig) -> float | None:
    if cfg.experiment in ("two_level", "four_level") and cfg.omega is not None:
        return 0.5 * cfg.omega
    if cfg.experiment == "random_banded":
        return 1.0
    return None


def validate(cfg: ExperimentConfig) -> list[Diagnostic]:
    """Every problem with ``cfg`` without running it.

    An empty list means runnable as is; warnings alone do not block a run.
    """
    diags: list[Diagnostic] = []

    def error(name, msg):
        diags.append(Diagnostic("error", name, msg))

    if cfg.experiment not in EXPERIMENTS:
        error("experiment", f"unknown experiment {cfg.experiment!r}; choose from {sorted(EXPERIMENTS)}")
        return diags
    for name in REQUIRED[cfg.experiment]:
        if getattr(cfg, name) is None:
            error(name, f"missing required field '{name}' for {cfg.experiment}")
    if cfg.experiment == "pxp" and not cfg.delta0_values():
        error("delta0", "pxp needs 'delta0' or 'delta0_log10'")
    for name in ("delta0", "omega", "width", "t_end", "bound_slack", "horizon_factor",
                 "remainder_slack"):
        value = getattr(cfg, name)
        if value is not None and not value > 0:
            error(name, f"must be positive, got {value!r}")
    for d0 in cfg.delta0_values():
        if not d0 > 0:
            error("delta0", f"must be positive, got {d0!r}")
    t_end, n_points = cfg.grid_spec()
    if n_points < 2:
        error("n_points", f"need at least 2 grid points, got {n_points}")
    if cfg.experiment == "random_banded":
        if cfg.n_bands < 2:
            error("n_bands", f"need at least 2 bands, got {cfg.n_bands}")
        if cfg.levels_per_band < 1:
            error("levels_per_band", f"need at least 1 level, got {cfg.levels_per_band}")
        if not cfg.gap_ratio > 2:
            error("gap_ratio", f"must exceed 2 so bands stay separated, got {cfg.gap_ratio}")
    if cfg.experiment == "pxp" and cfg.L is not None:
        if cfg.L < 2:
            error("L", f"chain length must be >= 2, got {cfg.L}")
        elif cfg.L > MAX_CHAIN_LENGTH:
            error("L", f"L={cfg.L} exceeds the dense diagonalization budget "
                       f"L <= {MAX_CHAIN_LENGTH} (dim {2**cfg.L})")
        if cfg.omega is not None and cfg.omega > 0:
            local = 0.5 * cfg.omega
            for d0 in cfg.delta0_values():
                if 0 < d0 < 10 * local * (1 - 1e-12):
                    error("delta0", f"delta0 = {d0:g} < 10||V||_* = {10 * local:g}")
    if cfg.fit_window is not None and (len(cfg.fit_window) != 2 or cfg.fit_window[0] >= cfg.fit_window[1]):
        error("fit_window", "must be [t_lo, t_hi] with t_lo < t_hi")
    norm_v = _regime_norm(cfg)
    gap = cfg.gap_ratio if cfg.experiment == "random_banded" else cfg.delta0
    if norm_v is not None and gap is not None and gap > 0 and gap < 10 * norm_v:
        diags.append(Diagnostic("warning", "delta0", "Δ₀ < 10‖V‖: asymptotic bound checks disabled"))
    return diags


def build_config(raw: dict[str, Any]) -> ExperimentConfig:
    """Construct and validate; raises :class:`ConfigError` listing every error."""
    cfg = ExperimentConfig.from_dict(raw)
    errors = [d for d in validate(cfg) if d.level == "error"]
    if errors:
        raise ConfigError("; ".join(str(d) for d in errors))
    return cfg
