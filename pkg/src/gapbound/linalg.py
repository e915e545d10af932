"""Dense Hermitian linear algebra used by every other module.

Propagators are always assembled from a single eigendecomposition and
rephased per time point; no series or Pade exponentials are used.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    NonConvergence,
    NonFiniteInput,
    NotAntiHermitian,
    NotHermitian,
)

# absolute floor for relative tolerances, avoids division by a zero norm
NORM_FLOOR = 1e-14
HERMITICITY_RTOL = 1e-12


def as_matrix(M, square: bool = True) -> np.ndarray:
    """Return ``M`` as a finite 2-d array (real or complex), square unless ``square=False``."""
    if isinstance(M, HermitianOperator):
        return M.matrix
    A = np.asarray(M)
    if A.ndim != 2 or (square and A.shape[0] != A.shape[1]):
        raise DimensionMismatch(f"expected a square matrix, got shape {A.shape}")
    if not np.issubdtype(A.dtype, np.complexfloating):
        A = A.astype(np.float64, copy=False)
    if not np.all(np.isfinite(A)):
        raise NonFiniteInput("matrix has NaN or Inf entries")
    return A


def _is_real(A: np.ndarray) -> bool:
    return not np.iscomplexobj(A) or not np.any(A.imag)


def _hermitian_norm(A: np.ndarray) -> float:
    if A.size == 0:
        return 0.0
    w = np.linalg.eigvalsh(A.real if _is_real(A) else A)
    return float(max(abs(w[0]), abs(w[-1])))


@dataclass(frozen=True)
class HermitianOperator:
    """A matrix certified Hermitian at construction.

    The stored matrix is the Hermitian part ``(M + M^dagger)/2``; the
    discarded anti-Hermitian defect (in operator norm) is kept in
    ``hermiticity_defect``. Real symmetric input stays real.
    """

    matrix: np.ndarray
    hermiticity_defect: float = 0.0

    @classmethod
    def from_matrix(cls, M, rtol: float = HERMITICITY_RTOL) -> "HermitianOperator":
        A = as_matrix(M)
        if np.iscomplexobj(A) and not np.any(A.imag):
            A = A.real
        D = A - A.conj().T
        if not np.any(D):
            return cls(np.array(A, copy=True), 0.0)
        H = 0.5 * (A + A.conj().T)
        defect = _hermitian_norm(1j * D)
        scale = max(_hermitian_norm(H), NORM_FLOOR)
        if defect > rtol * A.shape[0] * scale + NORM_FLOOR:
            raise NotHermitian(
                f"||M - M^dagger|| = {defect:.3e} exceeds {rtol:g} * dim * ||M|| "
                f"(dim={A.shape[0]}, ||M||={scale:.3e})"
            )
        if _is_real(H):
            H = H.real
        return cls(H, defect)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)


def hermitian(M) -> HermitianOperator:
    """Wrap ``M`` as a :class:`HermitianOperator` (no-op if it already is one)."""
    if isinstance(M, HermitianOperator):
        return M
    return HermitianOperator.from_matrix(M)


@dataclass(frozen=True)
class SpectralDecomposition:
    """Ascending eigenvalues and the matching orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    norm: float = field(default=0.0)

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.eigenvectors)

    def reconstruct(self) -> np.ndarray:
        U = self.eigenvectors
        return (U * self.eigenvalues) @ U.conj().T


def _is_diagonal(A: np.ndarray) -> bool:
    off = A.copy()
    np.fill_diagonal(off, 0)
    return not np.any(off)


def eig_hermitian(M) -> SpectralDecomposition:
    """Diagonalize a Hermitian operator.

    Real symmetric input is diagonalized in real arithmetic, so the
    eigenvectors come back real. Diagonal input is sorted directly (stable
    order), giving exact permutation eigenvectors.

    Raises
    ------
    NonConvergence
        If LAPACK fails to converge.
    """
    H = hermitian(M)
    A = H.matrix
    if _is_diagonal(A):
        d = np.real(np.diag(A))
        order = np.argsort(d, kind="stable")
        U = np.eye(A.shape[0], dtype=A.dtype)[:, order]
        w = d[order]
        norm = float(max(abs(w[0]), abs(w[-1]))) if w.size else 0.0
        return SpectralDecomposition(w, U, norm)
    try:
        w, U = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:
        raise NonConvergence(
            f"eigh failed for {A.shape[0]}x{A.shape[0]} {A.dtype} matrix "
            f"(hermiticity defect {H.hermiticity_defect:.2e}): {exc}"
        ) from exc
    norm = float(max(abs(w[0]), abs(w[-1]))) if w.size else 0.0
    return SpectralDecomposition(w, U, norm)


def operator_norm(M, hermitian: bool | None = None) -> float:
    """Largest singular value of ``M``.

    For certified-Hermitian input (a :class:`HermitianOperator`, or
    ``hermitian=True``) the largest absolute eigenvalue is used instead.
    """
    if hermitian is None:
        hermitian = isinstance(M, HermitianOperator)
    A = as_matrix(M, square=hermitian)
    if A.size == 0:
        return 0.0
    if hermitian:
        return _hermitian_norm(A)
    s = np.linalg.svd(A.real if _is_real(A) else A, compute_uv=False)
    return float(s[0])


def propagator(spec: SpectralDecomposition, t: float) -> np.ndarray:
    """Return ``exp(-i H t)`` for the operator ``H`` behind ``spec``."""
    U = spec.eigenvectors
    return (U * np.exp(-1j * spec.eigenvalues * t)) @ U.conj().T


def conjugate(U, O) -> np.ndarray:
    """Return ``U O U^dagger``."""
    U = np.asarray(U)
    O = np.asarray(O)
    if U.shape != O.shape or U.ndim != 2:
        raise DimensionMismatch(f"cannot conjugate {O.shape} by {U.shape}")
    return U @ O @ U.conj().T


def commutator(A, B) -> np.ndarray:
    """Return ``AB - BA``."""
    A = np.asarray(A)
    B = np.asarray(B)
    if A.shape != B.shape or A.ndim != 2:
        raise DimensionMismatch(f"commutator of {A.shape} and {B.shape}")
    return A @ B - B @ A


def exp_antihermitian(T) -> np.ndarray:
    """Unitary ``exp(T)`` for anti-Hermitian ``T``.

    Computed spectrally: ``iT`` is Hermitian with eigenpairs ``(mu, W)``,
    so ``exp(T) = W exp(-i mu) W^dagger``.
    """
    A = as_matrix(T)
    defect = operator_norm(A + A.conj().T, hermitian=True)
    scale = operator_norm(A)
    if defect > 1e-10 * max(1.0, scale):
        raise NotAntiHermitian(f"||T + T^dagger|| = {defect:.3e}")
    K = 1j * A
    K = 0.5 * (K + K.conj().T)
    spec = eig_hermitian(K)
    return propagator(spec, 1.0)


def unitarity_defect(U) -> float:
    U = np.asarray(U)
    return operator_norm(U.conj().T @ U - np.eye(U.shape[0]), hermitian=True)
