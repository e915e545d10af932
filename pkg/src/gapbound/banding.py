"""Isolated-band selection, projectors, block decomposition and gap certificates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, EmptyBand, NotBlockDiagonal, NotIsolated
from .linalg import (
    NORM_FLOOR,
    HermitianOperator,
    SpectralDecomposition,
    as_matrix,
    eig_hermitian,
    hermitian,
    operator_norm,
)

ISOLATION_RTOL = 1e-9
ZERO_RTOL = 1e-9
BLOCK_RTOL = 1e-8
SELECTOR_KINDS = ("index_range", "energy_window", "zero_subspace")


@dataclass(frozen=True)
class BandSelector:
    """How to pick the band: an eigenindex run, an energy window, or the zero subspace.

    ``lo``/``hi`` are inclusive eigenindices for ``index_range`` and energies
    for ``energy_window``; they are ignored for ``zero_subspace``.
    """

    kind: str
    lo: float | None = None
    hi: float | None = None

    def __post_init__(self):
        if self.kind not in SELECTOR_KINDS:
            raise ConfigError(f"unknown band kind {self.kind!r}; expected one of {SELECTOR_KINDS}")
        if self.kind != "zero_subspace" and (self.lo is None or self.hi is None):
            raise ConfigError(f"band kind {self.kind!r} needs both 'lo' and 'hi'")

    @classmethod
    def from_dict(cls, d: dict) -> "BandSelector":
        unknown = set(d) - {"kind", "lo", "hi"}
        if unknown:
            raise ConfigError(f"unknown band keys: {sorted(unknown)}")
        if "kind" not in d:
            raise ConfigError("band selector is missing 'kind'")
        return cls(d["kind"], d.get("lo"), d.get("hi"))

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind != "zero_subspace":
            out.update(lo=self.lo, hi=self.hi)
        return out


@dataclass
class BandPartition:
    band_indices: np.ndarray
    band_basis: np.ndarray        # dim x m isometry onto the band
    complement_basis: np.ndarray  # dim x (dim - m)
    delta_u: float
    delta_d: float
    blocks: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def delta0(self) -> float:
        return min(self.delta_u, self.delta_d)

    @property
    def rank(self) -> int:
        return self.band_indices.size

    @property
    def dim(self) -> int:
        return self.band_basis.shape[0]

    @property
    def P(self) -> np.ndarray:
        B = self.band_basis
        return B @ B.conj().T

    @property
    def Q(self) -> np.ndarray:
        return np.eye(self.dim) - self.P


@dataclass(frozen=True)
class GapCertificate:
    delta: float
    weyl_lower: float
    satisfied: bool
    delta0: float
    norm_V: float


def _isolation_tol(spec: SpectralDecomposition) -> float:
    return ISOLATION_RTOL * max(spec.norm, NORM_FLOOR)


def detect_band(spec: SpectralDecomposition, selector: BandSelector) -> np.ndarray:
    """Resolve a selector to a sorted array of eigenindices and check isolation."""
    w = spec.eigenvalues
    if selector.kind == "index_range":
        lo, hi = int(selector.lo), int(selector.hi)
        if lo < 0 or hi >= w.size or lo > hi:
            raise EmptyBand(f"index range [{lo}, {hi}] is empty or outside 0..{w.size - 1}")
        idx = np.arange(lo, hi + 1)
    elif selector.kind == "energy_window":
        idx = np.flatnonzero((w >= selector.lo) & (w <= selector.hi))
    else:
        idx = np.flatnonzero(np.abs(w) <= ZERO_RTOL * max(spec.norm, NORM_FLOOR))
    if idx.size == 0:
        raise EmptyBand(f"selector {selector.to_dict()} matches no eigenvalue")
    _check_isolated(w, idx, _isolation_tol(spec))
    return idx


def _check_isolated(w: np.ndarray, idx: np.ndarray, tol: float):
    if np.any(np.diff(idx) != 1):
        raise NotIsolated("band indices are not a contiguous run of sorted eigenvalues")
    lo, hi = w[idx[0]], w[idx[-1]]
    outside = np.delete(w, idx)
    if np.any((outside >= lo - tol) & (outside <= hi + tol)):
        raise NotIsolated(f"an outside eigenvalue lies within [{lo}, {hi}] (tolerance {tol:.1e})")


def band_partition(spec: SpectralDecomposition, band_indices, V=None) -> BandPartition:
    """Projectors, gaps to the neighbouring levels and (optionally) the blocks of ``V``.

    Blocks are stored under ``V_P``, ``V_Q``, ``V_off`` and ``V_diag``.
    """
    idx = np.asarray(sorted(band_indices), dtype=int)
    if idx.size == 0:
        raise EmptyBand("empty band")
    w = spec.eigenvalues
    _check_isolated(w, idx, _isolation_tol(spec))
    d_up = float(w[idx[-1] + 1] - w[idx[-1]]) if idx[-1] + 1 < w.size else np.inf
    d_down = float(w[idx[0]] - w[idx[0] - 1]) if idx[0] > 0 else np.inf
    mask = np.zeros(w.size, dtype=bool)
    mask[idx] = True
    partition = BandPartition(
        band_indices=idx,
        band_basis=spec.eigenvectors[:, mask],
        complement_basis=spec.eigenvectors[:, ~mask],
        delta_u=d_up,
        delta_d=d_down,
    )
    if V is not None:
        partition.blocks = decompose(as_matrix(V), partition)
    return partition


def decompose(V: np.ndarray, partition: BandPartition) -> dict[str, np.ndarray]:
    P = partition.P
    Q = np.eye(partition.dim) - P
    V_P = P @ V @ P
    V_Q = Q @ V @ Q
    # exact complement so that V_P + V_Q + V_off reproduces V bit for bit
    V_off = V - V_P - V_Q
    return {"V_P": V_P, "V_Q": V_Q, "V_off": V_off, "V_diag": V_P + V_Q}


def projected_hamiltonian(H, P) -> HermitianOperator:
    """``P H P`` as a full-space operator."""
    A = as_matrix(H)
    P = np.asarray(P)
    M = P @ A @ P
    return hermitian(0.5 * (M + M.conj().T))


def block_spectra(H1, partition: BandPartition) -> tuple[SpectralDecomposition, SpectralDecomposition]:
    """Eigendecompositions of the band block and the complement block of ``H1``.

    Returned in the coordinates of ``partition.band_basis`` and
    ``partition.complement_basis`` respectively.
    """
    A = as_matrix(H1)
    B, C = partition.band_basis, partition.complement_basis
    off = B.conj().T @ A @ C
    scale = max(operator_norm(H1, hermitian=True), NORM_FLOOR)
    defect = operator_norm(off) if off.size else 0.0
    if defect > BLOCK_RTOL * scale:
        raise NotBlockDiagonal(f"||P H1 Q|| = {defect:.3e} exceeds {BLOCK_RTOL:g} * ||H1||")
    HP = B.conj().T @ A @ B
    HQ = C.conj().T @ A @ C
    return (eig_hermitian(0.5 * (HP + HP.conj().T)),
            eig_hermitian(0.5 * (HQ + HQ.conj().T)))


def block_spectral_gap(H1, partition: BandPartition, norm_V: float | None = None) -> GapCertificate:
    """Gap between the band and complement spectra of ``H1`` plus the Weyl check."""
    sp_P, sp_Q = block_spectra(H1, partition)
    if sp_Q.dim == 0:
        delta = np.inf
    else:
        delta = float(np.min(np.abs(sp_P.eigenvalues[:, None] - sp_Q.eigenvalues[None, :])))
    if norm_V is None:
        b = partition.blocks
        norm_V = operator_norm(b["V_diag"] + b["V_off"], hermitian=True) if b else 0.0
    weyl_lower = partition.delta0 - 2.0 * norm_V
    return GapCertificate(
        delta=delta,
        weyl_lower=weyl_lower,
        satisfied=bool(delta >= weyl_lower - 1e-9),
        delta0=partition.delta0,
        norm_V=norm_V,
    )
