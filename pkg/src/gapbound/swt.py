"""Schrieffer-Wolff block diagonalization and its norm certificates."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np

from .banding import BandPartition, GapCertificate, block_spectra
from .errors import RegimeViolation, ZeroGap
from .linalg import (
    NORM_FLOOR,
    as_matrix,
    commutator,
    conjugate,
    exp_antihermitian,
    operator_norm,
)

RESONANCE_RTOL = 1e-12
REMAINDER_SLACK = 4.0
REGIME_RATIO = 10.0


@dataclass
class Certificate:
    """Outcome of one inequality check ``lhs <= rhs``; truthy iff it holds."""

    name: str
    lhs: float
    rhs: float
    holds: bool
    applicable: bool = True
    note: str = ""

    def __bool__(self) -> bool:
        return self.holds

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    def to_dict(self) -> dict:
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "holds": self.holds,
                "applicable": self.applicable, "margin": self.margin, "note": self.note}


@dataclass
class SwtResult:
    T: np.ndarray
    S: np.ndarray
    V_prime: np.ndarray
    H1: np.ndarray
    norm_T: float
    norm_V_prime: float
    norm_PVQ: float
    norm_V: float
    delta: float
    residual: float
    extras: dict = field(default_factory=dict)

    @property
    def bound_T(self) -> float:
        return self.norm_PVQ / self.delta if self.delta > 0 else np.inf

    @property
    def bound_V_prime(self) -> float:
        return self.norm_T * self.norm_V


def solve_sylvester(H1, partition: BandPartition) -> np.ndarray:
    """Anti-Hermitian, block-off-diagonal ``T`` with ``T H_Q - H_P T = -P V Q``.

    Solved entrywise in the eigenbases of the two diagonal blocks of ``H1``;
    the off-diagonal coupling is taken from ``partition.blocks['V_off']``.

    Raises
    ------
    ZeroGap
        If a band level and a complement level of ``H1`` are resonant.
    """
    H1 = as_matrix(H1)
    sp_P, sp_Q = block_spectra(H1, partition)
    B = partition.band_basis @ sp_P.eigenvectors
    C = partition.complement_basis @ sp_Q.eigenvectors
    denom = sp_P.eigenvalues[:, None] - sp_Q.eigenvalues[None, :]
    scale = max(operator_norm(H1, hermitian=True), NORM_FLOOR)
    if denom.size and np.min(np.abs(denom)) <= RESONANCE_RTOL * scale:
        raise ZeroGap(f"resonant levels: min |E_p - E_q| = {np.min(np.abs(denom)):.3e}")
    coupling = B.conj().T @ partition.blocks["V_off"] @ C
    T_PQ = B @ (coupling / denom) @ C.conj().T
    return T_PQ - T_PQ.conj().T


def sylvester_residual(T, H1, partition: BandPartition) -> float:
    """``||T H_Q - H_P T + P V Q||`` evaluated in full space."""
    H1 = as_matrix(H1)
    P = partition.P
    Q = np.eye(partition.dim) - P
    R = T @ (Q @ H1 @ Q) - (P @ H1 @ P) @ T + P @ partition.blocks["V_off"] @ Q
    return operator_norm(R)


def v_prime_exact(H, H1, T) -> np.ndarray:
    """``e^T H e^{-T} - H1``."""
    S = exp_antihermitian(T)
    return conjugate(S, as_matrix(H)) - as_matrix(H1)


def v_prime_series(T, V_off, N: int) -> np.ndarray:
    """Partial sum ``sum_{n=1}^{N} n/(n+1)! ad_T^n V_off``."""
    if N < 1:
        raise ValueError("series order must be >= 1")
    term = np.asarray(V_off)
    total = np.zeros(term.shape, dtype=np.result_type(term, T, np.float64))
    for n in range(1, N + 1):
        term = commutator(T, term)
        total = total + (n / factorial(n + 1)) * term
    return total


def series_tail_bound(norm_T: float, norm_V_off: float, N: int, terms: int = 200) -> float:
    """Upper bound on the truncation error of :func:`v_prime_series` at order ``N``."""
    x = 2.0 * norm_T
    return norm_V_off * sum(n / factorial(n + 1) * x**n for n in range(N + 1, N + 1 + terms))


def schrieffer_wolff(H, partition: BandPartition, norm_V: float | None = None) -> SwtResult:
    """Full transformation: generator, unitary, exact remainder and the norms the certificates need."""
    H = as_matrix(H)
    blocks = partition.blocks
    H1 = H - blocks["V_off"]
    sp_P, sp_Q = block_spectra(H1, partition)
    delta = (float(np.min(np.abs(sp_P.eigenvalues[:, None] - sp_Q.eigenvalues[None, :])))
             if sp_Q.dim else np.inf)
    T = solve_sylvester(H1, partition)
    S = exp_antihermitian(T)
    V_prime = conjugate(S, H) - H1
    P = partition.P
    PVQ = P @ blocks["V_off"] @ (np.eye(partition.dim) - P)
    if norm_V is None:
        norm_V = operator_norm(blocks["V_diag"] + blocks["V_off"], hermitian=True)
    return SwtResult(
        T=T,
        S=S,
        V_prime=V_prime,
        H1=H1,
        norm_T=operator_norm(T),
        norm_V_prime=operator_norm(0.5 * (V_prime + V_prime.conj().T), hermitian=True),
        norm_PVQ=operator_norm(PVQ),
        norm_V=norm_V,
        delta=delta,
        residual=sylvester_residual(T, H1, partition),
        extras={"norm_H": operator_norm(H, hermitian=True)},
    )


def certify_generator(swt: SwtResult, cert: GapCertificate | None = None) -> Certificate:
    """``||T|| <= ||PVQ|| / Delta`` (exact, needs only a positive block gap)."""
    delta = cert.delta if cert is not None else swt.delta
    rhs = swt.norm_PVQ / delta if delta > 0 else np.inf
    return Certificate("generator_norm", swt.norm_T, rhs, bool(swt.norm_T <= rhs + 1e-9))


def certify_remainder(swt: SwtResult, delta0: float, norm_V: float,
                      slack: float = REMAINDER_SLACK) -> Certificate:
    """``||V'|| <= ||T|| ||V|| (1 + slack ||V|| / delta0)``, only in the large-gap regime.

    Raises
    ------
    RegimeViolation
        If ``delta0 < 10 ||V||``.
    """
    if delta0 < REGIME_RATIO * norm_V:
        raise RegimeViolation(f"delta0 = {delta0:g} < {REGIME_RATIO:g} * ||V|| = {REGIME_RATIO * norm_V:g}")
    rhs = swt.norm_T * norm_V * (1.0 + slack * norm_V / delta0)
    return Certificate("remainder_norm", swt.norm_V_prime, rhs,
                       bool(swt.norm_V_prime <= rhs + 1e-12), note=f"slack={slack:g}")
