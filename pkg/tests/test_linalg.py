import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gapbound.errors import DimensionMismatch, NonFiniteInput, NotAntiHermitian, NotHermitian
from gapbound.linalg import (
    HermitianOperator,
    commutator,
    conjugate,
    eig_hermitian,
    exp_antihermitian,
    operator_norm,
    propagator,
    unitarity_defect,
)

from conftest import SX, SY, SZ, random_hermitian, random_unitary


def test_eig_diagonal_gives_sorted_permutation():
    spec = eig_hermitian(np.diag([3.0, 1.0, 2.0]))
    np.testing.assert_array_equal(spec.eigenvalues, [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(np.abs(spec.eigenvectors), np.eye(3)[:, [1, 2, 0]])


def test_eig_pauli_x():
    spec = eig_hermitian(SX)
    np.testing.assert_allclose(spec.eigenvalues, [-1.0, 1.0], atol=1e-15)


def test_eig_random_reconstruction(rng):
    M = random_hermitian(8, rng)
    spec = eig_hermitian(M)
    assert operator_norm(spec.reconstruct() - M) < 1e-10
    assert unitarity_defect(spec.eigenvectors) < 1e-10
    assert np.all(np.diff(spec.eigenvalues) >= 0)


def test_hermitian_operator_rejects_non_hermitian():
    with pytest.raises(NotHermitian):
        HermitianOperator.from_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_hermitian_operator_records_small_defect(rng):
    M = random_hermitian(6, rng)
    noisy = M + 1e-14 * (rng.standard_normal((6, 6)))
    op = HermitianOperator.from_matrix(noisy)
    assert 0 < op.hermiticity_defect < 1e-12
    np.testing.assert_array_equal(op.matrix, op.matrix.conj().T)


def test_non_finite_rejected():
    with pytest.raises(NonFiniteInput):
        operator_norm(np.array([[np.nan, 0], [0, 1]]))


@pytest.mark.parametrize("M, expected", [
    (np.eye(5), 1.0),
    (SX, 1.0),
    (np.array([[0.0, 2.0], [0.0, 0.0]]), 2.0),
])
def test_operator_norm_values(M, expected):
    assert operator_norm(M) == pytest.approx(expected, abs=1e-14)


def test_operator_norm_nilpotent_hand_oracle():
    M = np.array([[0.0, 2.0], [0.0, 0.0]])
    # M^dagger M = diag(0, 4) by hand
    MtM = np.array([[0.0, 0.0], [0.0, 4.0]])
    np.testing.assert_array_equal(M.T @ M, MtM)
    assert operator_norm(M) == pytest.approx(np.sqrt(4.0))


def test_operator_norm_hermitian_path_matches_svd(rng):
    M = random_hermitian(7, rng)
    assert operator_norm(M, hermitian=True) == pytest.approx(operator_norm(M), rel=1e-12)
    assert operator_norm(HermitianOperator.from_matrix(M)) == pytest.approx(np.max(np.abs(np.linalg.eigvalsh(M))))


def test_propagator_identity_at_zero(rng):
    spec = eig_hermitian(random_hermitian(4, rng))
    np.testing.assert_allclose(propagator(spec, 0.0), np.eye(4), atol=1e-12)


def test_propagator_half_period_phase():
    delta0 = 10.0
    spec = eig_hermitian(0.5 * delta0 * SZ)
    U = propagator(spec, 2 * np.pi / delta0)
    # diag(e^{-i pi}, e^{i pi}) = -1
    expected = np.diag([np.exp(-1j * np.pi), np.exp(1j * np.pi)])
    np.testing.assert_allclose(U, expected, atol=1e-14)
    np.testing.assert_allclose(U, -np.eye(2), atol=1e-14)


def test_propagator_inverse_pair(rng):
    spec = eig_hermitian(random_hermitian(5, rng))
    np.testing.assert_allclose(propagator(spec, 1.7) @ propagator(spec, -1.7), np.eye(5), atol=1e-12)


def test_conjugate_examples(rng):
    O = random_hermitian(2, rng)
    np.testing.assert_allclose(conjugate(np.eye(2), O), O)
    np.testing.assert_allclose(conjugate(SX, SZ), -SZ)
    U = random_unitary(6, rng)
    O = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    assert abs(operator_norm(conjugate(U, O)) - operator_norm(O)) < 1e-10


def test_conjugate_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        conjugate(np.eye(2), np.eye(3))


def test_exp_antihermitian_examples(rng):
    np.testing.assert_allclose(exp_antihermitian(np.zeros((3, 3))), np.eye(3))
    # cos(pi/2) + i sin(pi/2) sigma^x
    oracle = np.cos(np.pi / 2) * np.eye(2) + 1j * np.sin(np.pi / 2) * SX
    np.testing.assert_allclose(exp_antihermitian(1j * np.pi / 2 * SX), oracle, atol=1e-14)
    T = 1j * random_hermitian(5, rng)
    S = exp_antihermitian(T)
    assert unitarity_defect(S) < 1e-10
    np.testing.assert_allclose(S @ exp_antihermitian(-T), np.eye(5), atol=1e-10)


def test_exp_antihermitian_rejects_hermitian():
    with pytest.raises(NotAntiHermitian):
        exp_antihermitian(SX)


def test_commutator_examples(rng):
    np.testing.assert_allclose(commutator(SX, SY), 2j * SZ)
    A = random_hermitian(4, rng)
    np.testing.assert_array_equal(commutator(A, A), np.zeros((4, 4)))
    with pytest.raises(DimensionMismatch):
        commutator(np.eye(2), np.eye(3))


seeds = st.integers(min_value=0, max_value=2**32 - 1)
dims = st.integers(min_value=1, max_value=9)


@settings(max_examples=40, deadline=None)
@given(seed=seeds, dim=dims)
def test_commutator_antisymmetric_and_bounded(seed, dim):
    rng = np.random.default_rng(seed)
    T = 1j * random_hermitian(dim, rng)
    O = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    np.testing.assert_allclose(commutator(T, O), -commutator(O, T), atol=1e-12)
    assert operator_norm(commutator(T, O)) <= 2 * operator_norm(T) * operator_norm(O) * (1 + 1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=seeds, dim=dims,
       s=st.floats(min_value=-1e3, max_value=1e3), t=st.floats(min_value=-1e3, max_value=1e3))
def test_propagator_group_property(seed, dim, s, t):
    rng = np.random.default_rng(seed)
    spec = eig_hermitian(random_hermitian(dim, rng))
    lhs = propagator(spec, s) @ propagator(spec, t)
    assert operator_norm(lhs - propagator(spec, s + t)) <= 1e-9
    assert unitarity_defect(propagator(spec, t)) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(seed=seeds, dim=dims)
def test_spectral_invariants(seed, dim):
    rng = np.random.default_rng(seed)
    M = random_hermitian(dim, rng)
    spec = eig_hermitian(M)
    assert operator_norm(spec.reconstruct() - M) <= 1e-10 * max(operator_norm(M), 1e-14)
    assert unitarity_defect(spec.eigenvectors) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(seed=seeds, dim=dims)
def test_norm_submultiplicative_and_unitarily_invariant(seed, dim):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    B = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    U = random_unitary(dim, rng)
    assert operator_norm(A @ B) <= operator_norm(A) * operator_norm(B) + 1e-9
    assert abs(operator_norm(U @ A) - operator_norm(A)) <= 1e-9
    assert abs(operator_norm(A @ U) - operator_norm(A)) <= 1e-9
