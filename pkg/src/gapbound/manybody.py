"""Many-body growth analysis on the PXP parent chain: power-law fits, collapse and changepoint."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .banding import band_partition, detect_band
from .dynamics import BandEvolution, ErrorTrace, TimeGrid, _map, error_trace
from .errors import GridMismatch, NoTransition, RegimeViolation, WindowTooNarrow
from .linalg import eig_hermitian
from .models import build_pxp_parent, reflection_sectors
from .swt import REGIME_RATIO

MIN_WINDOW_POINTS = 10
TRANSITION_MIN_GAIN = 0.05


@dataclass(frozen=True)
class GrowthFit:
    window: tuple[float, float]
    linear: dict
    quadratic: dict
    preferred: str

    def to_dict(self) -> dict:
        return {"window": list(self.window), "linear": self.linear,
                "quadratic": self.quadratic, "preferred": self.preferred}


@dataclass(frozen=True)
class CollapseReport:
    delta0_values: np.ndarray
    times: np.ndarray
    rescaled: np.ndarray  # one row of delta0 * eps(t) per trace
    dispersion: float
    t_min: float

    def to_dict(self) -> dict:
        return {"delta0_values": self.delta0_values.tolist(), "dispersion": self.dispersion,
                "t_min": self.t_min}


def run_pxp_experiment(L: int, omega: float, delta0_list, grid: TimeGrid,
                       workers: int | None = 1) -> list[ErrorTrace]:
    """One error trace of ``sigma^y`` on the first site per blockade strength.

    ``H`` is diagonalized in its two reflection-parity blocks. Each run holds
    roughly 0.5 GB at ``L = 12``; ``workers`` bounds how many run at once.

    Raises
    ------
    RegimeViolation
        If some ``delta0 < 10 ||V||_*`` with ``||V||_* = omega/2``.
    """
    local = 0.5 * omega
    for d0 in delta0_list:
        if d0 < REGIME_RATIO * local * (1 - 1e-12):
            raise RegimeViolation(f"delta0 = {d0:g} < {REGIME_RATIO:g} ||V||_* = {REGIME_RATIO * local:g}")

    sectors = reflection_sectors(L)

    def one(d0):
        model, _ = build_pxp_parent(L, d0, omega)
        spec = eig_hermitian(model.H0)
        partition = band_partition(spec, detect_band(spec, model.band))
        # the open chain is mirror symmetric, so H splits into two parity blocks
        evolution = BandEvolution(model.H, model.O, partition.band_basis, sectors=sectors)
        trace = error_trace(model, partition, grid, workers=1, evolution=evolution)
        trace.metadata.update(band_dim=partition.rank, delta0_measured=partition.delta0)
        return trace

    return _map(one, list(delta0_list), workers)


def _lstsq(t: np.ndarray, y: np.ndarray, degree: int) -> tuple[np.ndarray, float]:
    A = np.vander(t, degree + 1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    rms = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return coef, rms


def fit_growth(trace: ErrorTrace, window: tuple[float, float]) -> GrowthFit:
    """Least-squares linear and quadratic fits of the error over ``window``.

    The quadratic is preferred only when its rms residual is smaller than the
    linear one by more than round-off (``1e-10`` of the trace scale).
    """
    t_lo, t_hi = window
    mask = (trace.times >= t_lo - 1e-12) & (trace.times <= t_hi + 1e-12)
    if mask.sum() < MIN_WINDOW_POINTS:
        raise WindowTooNarrow(f"window {window} holds {mask.sum()} points, need {MIN_WINDOW_POINTS}")
    t, y = trace.times[mask], trace.epsilon[mask]
    lin, lin_rms = _lstsq(t, y, 1)
    quad, quad_rms = _lstsq(t, y, 2)
    tol = 1e-10 * max(float(np.max(np.abs(y))), 1e-300)
    return GrowthFit(
        window=(float(t_lo), float(t_hi)),
        linear={"slope": float(lin[0]), "intercept": float(lin[1]), "rms_residual": lin_rms},
        quadratic={"c2": float(quad[0]), "c1": float(quad[1]), "c0": float(quad[2]),
                   "rms_residual": quad_rms},
        preferred="quadratic" if quad_rms < lin_rms - tol else "linear",
    )


def rescaled_collapse(traces: list[ErrorTrace], t_min: float | None = None) -> CollapseReport:
    """Spread of ``delta0 * eps(t)`` across traces with different gaps.

    ``dispersion`` is the maximum over ``t >= t_min`` of (max - min) / median
    across traces. ``t_min`` defaults to ``2 pi / min(delta0)``, the end of
    the slowest initial jump.
    """
    if len(traces) < 2:
        raise ValueError("need at least two traces")
    times = traces[0].times
    for tr in traces[1:]:
        if tr.times.shape != times.shape or not np.array_equal(tr.times, times):
            raise GridMismatch("traces do not share a time grid")
    delta0 = np.array([tr.metadata["delta0"] for tr in traces], dtype=float)
    rescaled = np.array([d * tr.epsilon for d, tr in zip(delta0, traces)])
    if t_min is None:
        t_min = 2 * np.pi / delta0.min()
    keep = times >= t_min
    R = rescaled[:, keep]
    med = np.median(R, axis=0)
    spread = R.max(axis=0) - R.min(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(med > 0, spread / med, np.where(spread > 0, np.inf, 0.0))
    return CollapseReport(delta0, times, rescaled, float(rel.max()) if rel.size else 0.0, float(t_min))


def lr_transition_time(trace: ErrorTrace, t_lo: float | None = None, min_side: int = 5) -> float:
    """Changepoint between early quadratic and late linear growth.

    Scans every grid point as a candidate, fitting a quadratic before it and
    a line after it, and returns the one with the least total squared
    residual. Fits start at ``t_lo`` (default ``10 pi / delta0`` when the
    trace records ``delta0``, else the first grid point).

    Raises
    ------
    NoTransition
        If the best split improves the rms of a single global quadratic by
        less than 5 %.
    """
    if t_lo is None:
        d0 = trace.metadata.get("delta0")
        t_lo = 10 * np.pi / d0 if d0 else trace.times[0]
    mask = trace.times >= t_lo - 1e-12
    t, y = trace.times[mask], trace.epsilon[mask]
    if t.size < 2 * min_side + 1:
        raise WindowTooNarrow(f"only {t.size} points after t = {t_lo:g}")
    _, global_rms = _lstsq(t, y, 2)
    best_sse, best_t = np.inf, None
    for i in range(min_side, t.size - min_side + 1):
        _, rms_a = _lstsq(t[:i], y[:i], 2)
        _, rms_b = _lstsq(t[i:], y[i:], 1)
        sse = rms_a**2 * i + rms_b**2 * (t.size - i)
        if sse < best_sse:
            best_sse, best_t = sse, float(t[i])
    split_rms = np.sqrt(best_sse / t.size)
    scale = max(float(np.max(np.abs(y))), 1e-300)
    if global_rms <= 1e-10 * scale or split_rms > (1 - TRANSITION_MIN_GAIN) * global_rms:
        raise NoTransition(f"split rms {split_rms:.3e} vs global quadratic rms {global_rms:.3e}")
    return best_t
