"""Error dynamics between full and band-constrained Heisenberg evolution.

The error at time ``t`` is the operator norm of

    P (e^{iHt} O e^{-iHt} - e^{iH_P t} O e^{-iH_P t}) P,      H_P = P H P.

With ``B`` an isometry onto the band this equals the norm of the ``m x m``
matrix ``B^dag (...) B``, so only the ``dim x m`` block ``e^{-iHt} B`` is ever
propagated. That is what keeps a 4096-dimensional chain tractable.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .banding import BandPartition
from .errors import DimensionMismatch, GridTooCoarse, IdentityViolation, NoJump, NotBlockDiagonal
from .linalg import (
    NORM_FLOOR,
    SpectralDecomposition,
    eig_hermitian,
    exp_antihermitian,
    hermitian,
    operator_norm,
    propagator,
    unitarity_defect,
)
from .models import ModelInstance
from .swt import REGIME_RATIO, Certificate, SwtResult

REWRITE_ATOL = 1e-8
BOUND_SLACK = 8.0
HORIZON_FACTOR = 0.1
STEP_GRACE = 0.01


def default_workers() -> int:
    env = os.environ.get("GAPBOUND_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class TimeGrid:
    t_start: float
    t_end: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 2:
            raise ValueError("a time grid needs at least two points")
        if not self.t_end > self.t_start:
            raise ValueError("t_end must exceed t_start")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.n_points)

    @property
    def step(self) -> float:
        return (self.t_end - self.t_start) / (self.n_points - 1)


@dataclass
class ErrorTrace:
    times: np.ndarray
    epsilon: np.ndarray
    bound: np.ndarray | None = None
    term_S: np.ndarray | None = None
    term_L: np.ndarray | None = None
    term_SH1: np.ndarray | None = None
    epsilon_rewritten: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def n_points(self) -> int:
        return self.times.size


def _norm(M: np.ndarray, herm: bool) -> float:
    if herm:
        M = 0.5 * (M + M.conj().T)
    return operator_norm(M, hermitian=herm)


def _is_hermitian(O: np.ndarray) -> bool:
    scale = max(np.max(np.abs(O)), NORM_FLOOR)
    return bool(np.max(np.abs(O - O.conj().T)) <= 1e-12 * scale)


def _operator_action(O: np.ndarray):
    """Matrix for left multiplication; sparse when ``O`` is mostly zeros."""
    nnz = np.count_nonzero(O)
    if O.shape[0] >= 64 and nnz <= 0.05 * O.size:
        return sp.csr_matrix(O)
    return O


class _Sector:
    """Eigendata of ``H`` restricted to one invariant subspace ``Q`` (``None`` = full space)."""

    def __init__(self, Q, spec: SpectralDecomposition, B: np.ndarray):
        self.Q = Q
        self.spec = spec
        QB = B if Q is None else Q.conj().T @ B
        self.X = spec.eigenvectors.conj().T @ QB
        self.real = spec.is_real and not np.iscomplexobj(self.X)

    def evolve(self, t: float) -> np.ndarray:
        W, lam = self.spec.eigenvectors, self.spec.eigenvalues
        if self.real:
            # one real product for both quadratures
            m = self.X.shape[1]
            parts = W @ np.hstack([np.cos(lam * t)[:, None] * self.X, np.sin(lam * t)[:, None] * self.X])
            out = parts[:, :m] - 1j * parts[:, m:]
        else:
            out = W @ (np.exp(-1j * lam * t)[:, None] * self.X)
        return out if self.Q is None else self.Q @ out


def _sector_spectrum(H: np.ndarray, Q) -> SpectralDecomposition:
    QH = np.asarray(Q.conj().T @ H)
    Hk = np.asarray((Q.T @ QH.T).T)  # Q^dag H Q
    leak = np.asarray((Q.T @ H.T).T) - np.asarray(Q @ Hk)  # H Q - Q Hk
    scale = max(float(np.max(np.abs(H))), NORM_FLOOR)
    if np.max(np.abs(leak), initial=0.0) > 1e-10 * scale:
        raise NotBlockDiagonal("H does not leave the given sector invariant")
    return eig_hermitian(0.5 * (Hk + Hk.conj().T))


class BandEvolution:
    """Precomputed spectral data for repeated evaluation of the error at many times.

    ``sectors`` optionally lists isometries (dense or sparse) onto mutually
    orthogonal subspaces that together span the space and that ``H`` leaves
    invariant, e.g. reflection parity sectors. ``H`` is then diagonalized
    sector by sector, which is exact and cheaper.
    """

    def __init__(self, H, O, band_basis: np.ndarray, spec_H: SpectralDecomposition | None = None,
                 sectors=None):
        B = band_basis
        H = np.asarray(hermitian(H).matrix)
        if sectors is None:
            self.sectors = [_Sector(None, spec_H if spec_H is not None else eig_hermitian(H), B)]
        else:
            if sum(Q.shape[1] for Q in sectors) != H.shape[0]:
                raise DimensionMismatch("sectors do not span the space")
            self.sectors = [_Sector(Q, _sector_spectrum(H, Q), B) for Q in sectors]
        O = np.asarray(O)
        self.O_action = _operator_action(O)
        self.herm = _is_hermitian(O)
        HB = H @ B
        self.spec_band = eig_hermitian(0.5 * (B.conj().T @ HB + (B.conj().T @ HB).conj().T))
        self.O_band = B.conj().T @ (self.O_action @ B)

    def evolved_band(self, t: float) -> np.ndarray:
        """``e^{-iHt} B`` (dim x m)."""
        parts = [sector.evolve(t) for sector in self.sectors]
        return parts[0] if len(parts) == 1 else sum(parts[1:], parts[0])

    def full_block(self, t: float) -> np.ndarray:
        A = self.evolved_band(t)
        return A.conj().T @ (self.O_action @ A)

    def constrained_block(self, t: float) -> np.ndarray:
        Y = propagator(self.spec_band, t)
        return Y.conj().T @ self.O_band @ Y

    def epsilon(self, t: float) -> float:
        return _norm(self.full_block(t) - self.constrained_block(t), self.herm)


def _map(fn, items, workers: int | None):
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def error_trace(model: ModelInstance, partition: BandPartition, grid: TimeGrid,
                workers: int | None = None, evolution: BandEvolution | None = None) -> ErrorTrace:
    """Error between full and constrained dynamics of ``model.O`` on ``grid``."""
    if evolution is None:
        evolution = BandEvolution(model.H, model.O, partition.band_basis)
    times = grid.times
    eps = np.array(_map(evolution.epsilon, list(times), workers))
    if times[0] == 0.0:
        eps[0] = 0.0 if eps[0] < 1e-12 else eps[0]
    return ErrorTrace(times=times, epsilon=eps, metadata=dict(model.metadata))


@dataclass(frozen=True)
class BoundCurve:
    values: np.ndarray
    intercept: float
    slope: float
    horizon: float
    in_regime: bool


def asymptotic_bound(norm_V: float, delta0: float, grid: TimeGrid | np.ndarray) -> BoundCurve:
    """Linear-in-time bound ``4||V||/delta0 + 2||V||^2 t / delta0``.

    ``horizon`` is ``delta0 / ||V||^2`` and ``in_regime`` flags ``delta0 >= 10 ||V||``.
    """
    if not delta0 > 0:
        raise ValueError("delta0 must be positive")
    t = grid.times if isinstance(grid, TimeGrid) else np.asarray(grid, dtype=float)
    intercept = 4.0 * norm_V / delta0
    slope = 2.0 * norm_V**2 / delta0
    horizon = delta0 / norm_V**2 if norm_V > 0 else np.inf
    return BoundCurve(intercept + slope * t, intercept, slope, horizon,
                      bool(delta0 >= REGIME_RATIO * norm_V))


def analytic_two_level(delta0: float, omega: float, t):
    """Closed-form error of the driven two-level atom (ground band, O = sigma^x)."""
    gap = np.hypot(delta0, omega)
    return delta0 * omega / gap**2 * np.abs(1.0 - np.cos(gap * np.asarray(t, dtype=float)))


def analytic_four_level(delta0: float, omega: float, t):
    """Closed-form error of the half-driven atom pair (single-excitation band, swap observable)."""
    gap = np.hypot(delta0, omega)
    t = np.asarray(t, dtype=float)
    amp = np.cos(gap * t / 2) + 1j * (delta0 / gap) * np.sin(gap * t / 2)
    return np.abs(amp**2 - np.exp(1j * delta0 * t))


def error_decomposition(model: ModelInstance, partition: BandPartition, swt: SwtResult,
                        grid: TimeGrid, workers: int | None = None,
                        evolution: BandEvolution | None = None, check: bool = True) -> ErrorTrace:
    """Error trace plus the rewritten error and the three triangle-inequality terms.

    The rewritten form conjugates ``O`` successively by ``S``, the echo
    ``L(t) = e^{-iH1 t} e^{i(H1+V')t}`` and ``S_{H1}(t)^dag``, with
    ``S_{H1}(t) = e^{-iH1 t} S e^{iH1 t}``. Full-space matrices are used
    throughout, so this is meant for small dimensions.

    Raises
    ------
    IdentityViolation
        If the rewritten error departs from the direct one by more than 1e-8.
    """
    trace = error_trace(model, partition, grid, workers=workers, evolution=evolution)
    O = np.asarray(model.O)
    herm = _is_hermitian(O)
    B = partition.band_basis
    H1 = swt.H1
    S = swt.S
    spec_H1 = eig_hermitian(H1)
    K = H1 + swt.V_prime
    spec_K = eig_hermitian(0.5 * (K + K.conj().T))
    SOS = S @ O @ S.conj().T
    term_S = _norm(SOS - O, herm)

    def point(t):
        E1 = propagator(spec_H1, t)
        L = E1 @ propagator(spec_K, -t)
        S_t = E1 @ S @ E1.conj().T
        inner = L @ SOS @ L.conj().T
        R = S_t.conj().T @ inner @ S_t - O
        rewritten = _norm(B.conj().T @ R @ B, herm)
        t_L = _norm(L @ O @ L.conj().T - O, herm)
        t_SH1 = _norm(S_t.conj().T @ O @ S_t - O, herm)
        defects = max(unitarity_defect(L), unitarity_defect(S_t))
        return rewritten, t_L, t_SH1, defects

    rows = np.array(_map(point, list(trace.times), workers))
    trace.epsilon_rewritten = rows[:, 0]
    trace.term_S = np.full(trace.n_points, term_S)
    trace.term_L = rows[:, 1]
    trace.term_SH1 = rows[:, 2]
    gap = float(np.max(np.abs(trace.epsilon_rewritten - trace.epsilon)))
    trace.metadata.update(
        rewrite_defect=gap,
        unitarity_defect=float(rows[:, 3].max()),
        norm_T=swt.norm_T,
        norm_V_prime=swt.norm_V_prime,
    )
    if check and gap > REWRITE_ATOL:
        raise IdentityViolation(f"rewritten error differs from direct error by {gap:.3e}")
    return trace


def check_asymptotic_bound(trace: ErrorTrace, norm_V: float, delta0: float,
                           slack: float = BOUND_SLACK,
                           horizon_factor: float = HORIZON_FACTOR) -> Certificate:
    """Pointwise ``eps(t) <= bound(t) * (1 + slack ||V|| / delta0)`` over the validity window.

    The window is ``t <= min(2/||V||, horizon_factor * delta0 / ||V||^2)``.
    ``lhs`` is the worst ratio ``eps / slackened bound`` (holds iff ``<= 1``);
    the smallest absolute margin is in ``note``.
    """
    if delta0 < REGIME_RATIO * norm_V:
        return Certificate("asymptotic_bound", np.nan, np.nan, True, applicable=False,
                           note=f"delta0 < {REGIME_RATIO:g}||V||: asymptotic bound checks disabled")
    curve = asymptotic_bound(norm_V, delta0, trace.times)
    t_max = min(2.0 / norm_V, horizon_factor * delta0 / norm_V**2) if norm_V > 0 else trace.times[-1]
    window = trace.times <= t_max + 1e-12
    rhs = curve.values[window] * (1.0 + slack * norm_V / delta0)
    eps = trace.epsilon[window]
    ratio = float(np.max(eps / np.maximum(rhs, NORM_FLOOR))) if rhs.size else 0.0
    margin = float(np.min(rhs - eps)) if rhs.size else np.inf
    return Certificate("asymptotic_bound", ratio, 1.0, bool(np.all(eps <= rhs + 1e-12)),
                       note=f"min margin {margin:.6g} over t <= {t_max:.6g}; slack={slack:g}")


def jump_time(trace: ErrorTrace, delta0: float) -> float:
    """Earliest time at which the error reaches half its early-plateau median.

    The plateau is sampled over ``[2 pi/delta0, 10 pi/delta0]``.

    Raises
    ------
    GridTooCoarse
        If the step exceeds ``0.1/delta0`` (by more than 1 %) or the grid stops before ``10 pi/delta0``.
    NoJump
        If the error vanishes on the plateau.
    """
    t = trace.times
    dt = t[1] - t[0]
    # 1% grace so that n points on [0, t_end] count as step t_end / n
    if dt > 0.1 / delta0 * (1 + STEP_GRACE) or t[-1] < 10 * np.pi / delta0 * (1 - 1e-9):
        raise GridTooCoarse(f"need dt <= {0.1 / delta0:.3g} and t_end >= {10 * np.pi / delta0:.3g}")
    plateau = (t >= 2 * np.pi / delta0) & (t <= 10 * np.pi / delta0)
    level = float(np.median(trace.epsilon[plateau]))
    if level <= 1e-12:
        raise NoJump("error vanishes after the jump window")
    hits = np.flatnonzero(trace.epsilon >= 0.5 * level)
    return float(t[hits[0]])


def conjugation_defect(T, O) -> float:
    """``||e^T O e^{-T} - O||``; used to spot-check the ``2||T||`` bound."""
    S = exp_antihermitian(T)
    return operator_norm(S @ O @ S.conj().T - O)
