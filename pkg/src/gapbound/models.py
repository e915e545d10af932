"""Hamiltonians, perturbations, observables and band selections for the experiments.

Single-site basis ordering is ``(|g>, |e>)`` with ``sigma^z |e> = +|e>``, so
``(1 + sigma^z)/2`` counts excitations. For chains, site 0 is the leftmost
Kronecker factor (most significant bit of the basis index).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
import scipy.sparse as sp

from .banding import BandSelector
from .errors import BandOverlap, ConfigError, DimensionBudgetExceeded, NumericalError
from .linalg import HermitianOperator, commutator, hermitian, operator_norm

MAX_CHAIN_LENGTH = 14

ID2 = np.eye(2)
SX = np.array([[0.0, 1.0], [1.0, 0.0]])
SY = np.array([[0.0, 1.0j], [-1.0j, 0.0]])  # i(|g><e| - |e><g|)
SZ = np.array([[-1.0, 0.0], [0.0, 1.0]])
N_EXC = 0.5 * (ID2 + SZ)


@dataclass(frozen=True)
class LocalTerm:
    support: tuple[int, ...]
    operator: np.ndarray
    label: str = ""

    def __post_init__(self):
        if len(self.support) == 0:
            raise ValueError("local term needs a nonempty support")
        if list(self.support) != sorted(set(self.support)):
            raise ValueError(f"support {self.support} must be strictly increasing")

    def norm(self) -> float:
        return operator_norm(self.operator)


def _embed(term: LocalTerm, L: int, local_dim: int = 2) -> sp.csr_matrix:
    """Embed a local term into the full ``local_dim**L`` space (sparse)."""
    k = len(term.support)
    if term.operator.shape != (local_dim**k, local_dim**k):
        raise ValueError(f"operator shape {term.operator.shape} does not match support {term.support}")
    if term.support[0] < 0 or term.support[-1] >= L:
        raise ValueError(f"support {term.support} outside a chain of length {L}")
    lo, hi = term.support[0], term.support[-1]
    if hi - lo + 1 == k:
        left = sp.identity(local_dim**lo, format="csr")
        right = sp.identity(local_dim ** (L - hi - 1), format="csr")
        return sp.kron(sp.kron(left, sp.csr_matrix(term.operator)), right, format="csr")
    # non-contiguous support: permute tensor legs of the dense operator
    span = hi - lo + 1
    others = [s for s in range(lo, hi + 1) if s not in term.support]
    op = np.kron(term.operator, np.eye(local_dim ** len(others)))
    order = [s - lo for s in term.support] + [s - lo for s in others]
    inv = np.argsort(order)
    op = op.reshape([local_dim] * (2 * span))
    op = op.transpose(list(inv) + [span + i for i in inv]).reshape(local_dim**span, local_dim**span)
    shifted = LocalTerm(tuple(range(lo, hi + 1)), op, term.label)
    return _embed(shifted, L, local_dim)


@dataclass
class LatticeModel:
    L: int
    local_dim: int
    h0_terms: list[LocalTerm]
    v_terms: list[LocalTerm]
    commuting_h0: bool = True

    def __post_init__(self):
        if self.commuting_h0:
            self.check_commuting()

    def check_commuting(self, atol: float = 1e-10) -> float:
        """Largest commutator norm among overlapping H0 terms; raises if above ``atol``."""
        worst = 0.0
        for i, a in enumerate(self.h0_terms):
            for b in self.h0_terms[i + 1 :]:
                if not set(a.support) & set(b.support):
                    continue
                lo = min(a.support[0], b.support[0])
                hi = max(a.support[-1], b.support[-1])
                n = hi - lo + 1
                A = _embed(LocalTerm(tuple(s - lo for s in a.support), a.operator), n, self.local_dim)
                B = _embed(LocalTerm(tuple(s - lo for s in b.support), b.operator), n, self.local_dim)
                worst = max(worst, operator_norm(commutator(A.toarray(), B.toarray())))
        if worst > atol:
            raise NumericalError(f"H0 terms declared commuting but ||[h_i, h_j]|| = {worst:.3e}")
        return worst

    def assemble(self, terms: list[LocalTerm]) -> np.ndarray:
        dim = self.local_dim**self.L
        total = sp.csr_matrix((dim, dim), dtype=np.result_type(*[t.operator for t in terms], np.float64))
        for term in terms:
            total = total + _embed(term, self.L, self.local_dim)
        return total.toarray()

    def h0(self) -> np.ndarray:
        return self.assemble(self.h0_terms)

    def v(self) -> np.ndarray:
        return self.assemble(self.v_terms)


@dataclass
class ModelInstance:
    """Unperturbed Hamiltonian, perturbation, unit-norm observable and band choice."""

    H0: HermitianOperator
    V: HermitianOperator
    O: np.ndarray
    band: BandSelector
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.H0 = hermitian(self.H0)
        self.V = hermitian(self.V)
        if self.H0.dim != self.V.dim or self.O.shape != (self.H0.dim, self.H0.dim):
            raise ValueError("H0, V and O must share one dimension")
        norm_o = self.metadata.get("norm_O")
        if norm_o is None:
            norm_o = operator_norm(self.O)
        if abs(norm_o - 1.0) > 1e-10:
            raise ValueError(f"observable must have unit operator norm, got {norm_o!r}")

    @property
    def dim(self) -> int:
        return self.H0.dim

    @property
    def H(self) -> HermitianOperator:
        return HermitianOperator(self.H0.matrix + self.V.matrix)

    def norm_V(self) -> float:
        if "norm_V" not in self.metadata:
            self.metadata["norm_V"] = operator_norm(self.V)
        return self.metadata["norm_V"]


def _require_positive(**params):
    for name, value in params.items():
        if not value > 0:
            raise ConfigError(f"{name} must be positive, got {value!r}")


def build_two_level(delta0: float, omega: float) -> ModelInstance:
    """Driven two-level atom; band = ground level, observable = sigma^x."""
    _require_positive(delta0=delta0, omega=omega)
    return ModelInstance(
        H0=HermitianOperator(0.5 * delta0 * SZ),
        V=HermitianOperator(0.5 * omega * SX),
        O=SX.copy(),
        band=BandSelector("index_range", 0, 0),
        metadata={"model": "two_level", "delta0": delta0, "omega": omega,
                  "norm_V": 0.5 * omega, "norm_O": 1.0},
    )


def build_four_level(delta0: float, omega: float) -> ModelInstance:
    """Two atoms, only the first driven; band = single-excitation manifold.

    The observable ``(XX + YY)/2`` swaps ``|ge>`` and ``|eg>``.
    """
    _require_positive(delta0=delta0, omega=omega)
    H0 = 0.5 * delta0 * (np.kron(SZ, ID2) + np.kron(ID2, SZ))
    V = 0.5 * omega * np.kron(SX, ID2)
    O = 0.5 * (np.kron(SX, SX) + np.kron(SY, SY))
    return ModelInstance(
        H0=HermitianOperator(H0),
        V=HermitianOperator(V),
        O=np.real_if_close(O),
        band=BandSelector("index_range", 1, 2),
        metadata={"model": "four_level", "delta0": delta0, "omega": omega,
                  "norm_V": 0.5 * omega, "norm_O": 1.0},
    )


def gue(dim: int, rng: np.random.Generator) -> np.ndarray:
    """One GUE sample (unnormalized)."""
    A = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return 0.5 * (A + A.conj().T)


def _unit_norm(M: np.ndarray) -> np.ndarray:
    return M / operator_norm(M, hermitian=True)


def build_random_banded(
    seed: int,
    n_bands: int = 3,
    levels_per_band: int = 4,
    gap_ratio: float = 10.0,
    width: float = 1.0,
) -> ModelInstance:
    """Random banded model with GUE perturbation and observable, both of unit norm.

    Band ``k`` is centred at ``k * (gap_ratio + width)`` with levels drawn
    uniformly over ``width``. The band selection is the middle band. The
    gap stored in the metadata is measured from the drawn levels.
    """
    if n_bands < 2 or levels_per_band < 1:
        raise ConfigError("need n_bands >= 2 and levels_per_band >= 1")
    if not gap_ratio > 2:
        raise ConfigError(f"gap_ratio must exceed 2, got {gap_ratio!r}")
    _require_positive(width=width)
    rng = np.random.default_rng(seed)
    bands = []
    for k in range(n_bands):
        c = k * (gap_ratio + width)
        bands.append(np.sort(rng.uniform(c - width / 2, c + width / 2, size=levels_per_band)))
    for lower, upper in zip(bands, bands[1:]):
        if not lower[-1] < upper[0]:
            raise BandOverlap(f"bands overlap: {lower[-1]} >= {upper[0]}")
    levels = np.concatenate(bands)
    dim = levels.size
    V = _unit_norm(gue(dim, rng))
    O = _unit_norm(gue(dim, rng))
    middle = n_bands // 2
    lo = middle * levels_per_band
    hi = lo + levels_per_band - 1
    d_up = levels[hi + 1] - levels[hi] if hi + 1 < dim else np.inf
    d_down = levels[lo] - levels[lo - 1] if lo > 0 else np.inf
    return ModelInstance(
        H0=HermitianOperator(np.diag(levels)),
        V=HermitianOperator.from_matrix(V),
        O=O,
        band=BandSelector("index_range", lo, hi),
        metadata={
            "model": "random_banded", "seed": seed, "n_bands": n_bands,
            "levels_per_band": levels_per_band, "gap_ratio": gap_ratio, "width": width,
            "delta0": float(min(d_up, d_down)), "norm_V": 1.0, "norm_O": 1.0,
        },
    )


def _check_chain_length(L: int):
    if L < 2:
        raise ConfigError(f"chain length must be >= 2, got {L}")
    if L > MAX_CHAIN_LENGTH:
        raise DimensionBudgetExceeded(
            f"L={L} exceeds the dense budget L <= {MAX_CHAIN_LENGTH} (dim {2**L})"
        )


def pxp_lattice(L: int, delta0: float, omega: float) -> LatticeModel:
    h0 = [LocalTerm((j, j + 1), delta0 * np.kron(N_EXC, N_EXC), f"blockade[{j},{j + 1}]")
          for j in range(L - 1)]
    v = [LocalTerm((j,), 0.5 * omega * SX, f"drive[{j}]") for j in range(L)]
    return LatticeModel(L, 2, h0, v, commuting_h0=True)


def build_pxp_parent(L: int, delta0: float, omega: float) -> tuple[ModelInstance, LatticeModel]:
    """Open Rydberg chain with nearest-neighbour blockade ``delta0`` and drive ``omega``.

    The band is the zero-energy (blockaded) subspace of H0 and the observable
    is ``sigma^y`` on the first site.
    """
    _check_chain_length(L)
    _require_positive(delta0=delta0, omega=omega)
    lattice = pxp_lattice(L, delta0, omega)
    O = sp.kron(sp.csr_matrix(SY), sp.identity(2 ** (L - 1)), format="csr").toarray()
    model = ModelInstance(
        H0=HermitianOperator(lattice.h0()),
        V=HermitianOperator(lattice.v()),
        O=O,
        band=BandSelector("zero_subspace"),
        metadata={
            "model": "pxp", "L": L, "delta0": delta0, "omega": omega, "norm_O": 1.0,
            "norm_V": 0.5 * omega * L,
            "norm_V_local": local_interaction_strength(lattice.v_terms, L),
            "band_dim": fibonacci_count(L), "lattice_dim": 1,
        },
    )
    return model, lattice


def allowed_configurations(L: int) -> np.ndarray:
    """Basis indices with no two adjacent excitations (open chain)."""
    idx = np.arange(2**L)
    return idx[(idx & (idx >> 1)) == 0]


def fibonacci_count(L: int) -> int:
    a, b = 1, 2  # strings of length 0 and 1
    for _ in range(L - 1):
        a, b = b, a + b
    return b


def pxp_constraint_projector(L: int) -> np.ndarray:
    """Diagonal 0/1 projector onto the blockaded subspace."""
    _check_chain_length(L)
    diag = np.zeros(2**L)
    diag[allowed_configurations(L)] = 1.0
    return np.diag(diag)


def local_interaction_strength(terms: list[LocalTerm], L: int) -> float:
    """Max over sites of the summed operator norms of the terms touching that site."""
    if not terms:
        return 0.0
    per_site = np.zeros(L)
    for term in terms:
        if term.support[0] < 0 or term.support[-1] >= L:
            raise ValueError(f"support {term.support} outside a chain of length {L}")
        per_site[list(term.support)] += term.norm()
    return float(per_site.max())


def reflection_sectors(L: int, local_dim: int = 2) -> list[sp.csr_matrix]:
    """Sparse isometries onto the even and odd subspaces of the site reflection ``j -> L-1-j``.

    Any chain Hamiltonian whose terms are mirror symmetric is block diagonal in
    these two sectors.
    """
    dim = local_dim**L
    digits = np.array(np.unravel_index(np.arange(dim), (local_dim,) * L))
    mirror = np.ravel_multi_index(digits[::-1], (local_dim,) * L)
    idx = np.arange(dim)
    fixed = idx[mirror == idx]
    pairs = idx[idx < mirror]
    r = 1.0 / np.sqrt(2.0)
    even = sp.csr_matrix(
        (np.concatenate([np.ones(fixed.size), np.full(2 * pairs.size, r)]),
         (np.concatenate([fixed, pairs, mirror[pairs]]),
          np.concatenate([np.arange(fixed.size), fixed.size + np.tile(np.arange(pairs.size), 2)]))),
        shape=(dim, fixed.size + pairs.size))
    odd = sp.csr_matrix(
        (np.concatenate([np.full(pairs.size, r), np.full(pairs.size, -r)]),
         (np.concatenate([pairs, mirror[pairs]]), np.tile(np.arange(pairs.size), 2))),
        shape=(dim, pairs.size))
    return [even, odd]
