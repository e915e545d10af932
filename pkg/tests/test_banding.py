import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gapbound.banding import (
    BandSelector,
    band_partition,
    block_spectral_gap,
    detect_band,
    projected_hamiltonian,
)
from gapbound.errors import ConfigError, EmptyBand, NotBlockDiagonal, NotIsolated
from gapbound.linalg import eig_hermitian, operator_norm
from gapbound.models import SX, build_pxp_parent, build_random_banded, build_two_level


def partition_of(model, with_v=True):
    spec = eig_hermitian(model.H0)
    return band_partition(spec, detect_band(spec, model.band), model.V if with_v else None)


def test_partition_three_levels():
    spec = eig_hermitian(np.diag([-5.0, 0.0, 5.0]))
    part = band_partition(spec, [1])
    np.testing.assert_array_equal(part.P, np.diag([0.0, 1.0, 0.0]))
    assert part.delta_u == part.delta_d == part.delta0 == 5.0


def test_partition_two_level_ground():
    m = build_two_level(10.0, 1.0)
    part = partition_of(m)
    np.testing.assert_array_equal(part.P, np.diag([1.0, 0.0]))
    assert part.delta0 == pytest.approx(10.0)
    assert part.delta_d == np.inf


def test_partition_pxp_three_sites():
    m, _ = build_pxp_parent(3, 7.0, 2.0)
    part = partition_of(m, with_v=False)
    assert int(round(np.trace(part.P))) == 5
    assert part.delta0 == pytest.approx(7.0)


def test_detect_band_selectors():
    spec = eig_hermitian(np.diag([0.0, 0.0, 7.0]))
    np.testing.assert_array_equal(detect_band(spec, BandSelector("zero_subspace")), [0, 1])
    spec = eig_hermitian(np.diag([-5.0, 0.0, 5.0]))
    np.testing.assert_array_equal(detect_band(spec, BandSelector("energy_window", -1, 1)), [1])


def test_detect_band_pxp_twelve_sites():
    m, _ = build_pxp_parent(12, 10.0, 2.0)
    spec = eig_hermitian(m.H0)
    assert detect_band(spec, BandSelector("zero_subspace")).size == 377


def test_detect_band_errors():
    spec = eig_hermitian(np.diag([0.0, 0.0, 7.0]))
    with pytest.raises(NotIsolated):
        detect_band(spec, BandSelector("index_range", 0, 0))
    with pytest.raises(EmptyBand):
        detect_band(spec, BandSelector("energy_window", 2, 3))
    with pytest.raises(EmptyBand):
        detect_band(spec, BandSelector("index_range", 2, 5))
    with pytest.raises(NotIsolated):
        band_partition(spec, [1, 2])


def test_selector_validation():
    with pytest.raises(ConfigError):
        BandSelector("somewhere")
    with pytest.raises(ConfigError):
        BandSelector("energy_window", 0.0)
    assert BandSelector.from_dict({"kind": "index_range", "lo": 1, "hi": 2}) == BandSelector("index_range", 1, 2)


def test_projected_hamiltonian_identity_and_two_level(rng):
    A = rng.standard_normal((4, 4))
    H = A + A.T
    np.testing.assert_allclose(projected_hamiltonian(H, np.eye(4)).matrix, H)
    m = build_two_level(10.0, 1.0)
    part = partition_of(m)
    HP = projected_hamiltonian(m.H, part.P).matrix
    np.testing.assert_allclose(HP, np.diag([-5.0, 0.0]), atol=1e-15)


@pytest.mark.parametrize("L", [3, 6])
def test_projected_pxp_is_local_projector_form(L):
    omega = 2.0
    m, _ = build_pxp_parent(L, 50.0, omega)
    part = partition_of(m, with_v=False)
    HP = projected_hamiltonian(m.H, part.P).matrix
    # sum_j Pg_{j-1} X_j Pg_{j+1}, Pg = |g><g|, open ends
    Pg = np.diag([1.0, 0.0])
    pxp = np.zeros((2**L, 2**L))
    for j in range(L):
        ops = [np.eye(2)] * L
        ops[j] = SX
        if j > 0:
            ops[j - 1] = Pg
        if j < L - 1:
            ops[j + 1] = Pg
        term = ops[0]
        for op in ops[1:]:
            term = np.kron(term, op)
        pxp += term
    P = part.P
    np.testing.assert_allclose(HP, 0.5 * omega * P @ pxp @ P, atol=1e-13)


def test_block_gap_zero_perturbation():
    spec = eig_hermitian(np.diag([-4.0, 1.0, 6.5]))
    part = band_partition(spec, [1], np.zeros((3, 3)))
    cert = block_spectral_gap(np.diag([-4.0, 1.0, 6.5]), part)
    assert cert.delta == pytest.approx(5.0)
    assert cert.delta == part.delta0
    assert cert.satisfied


def test_block_gap_two_level():
    m = build_two_level(10.0, 1.0)
    part = partition_of(m)
    np.testing.assert_array_equal(part.blocks["V_diag"], 0)
    H1 = m.H0.matrix + part.blocks["V_diag"]
    cert = block_spectral_gap(H1, part, norm_V=0.5)
    assert cert.delta == pytest.approx(10.0)
    assert cert.weyl_lower == pytest.approx(9.0)
    assert cert.satisfied


def test_block_gap_rejects_full_hamiltonian():
    m = build_two_level(10.0, 1.0)
    with pytest.raises(NotBlockDiagonal):
        block_spectral_gap(m.H.matrix, partition_of(m))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_random_banded_blocks_and_weyl(seed):
    m = build_random_banded(seed, 3, 4, 10.0)
    part = partition_of(m)
    b = part.blocks
    P, Q = part.P, part.Q
    V = m.V.matrix
    np.testing.assert_array_equal(b["V_P"] + b["V_Q"] + b["V_off"], V)
    assert operator_norm(P @ b["V_off"] @ P) <= 1e-12
    assert operator_norm(Q @ b["V_off"] @ Q) <= 1e-12
    assert operator_norm(b["V_off"]) <= operator_norm(V) + 1e-10
    assert operator_norm(P @ P - P) <= 1e-10 and operator_norm(P @ Q) <= 1e-10
    assert int(round(np.trace(P).real)) == part.rank
    H1 = m.H0.matrix + b["V_diag"]
    cert = block_spectral_gap(H1, part, norm_V=1.0)
    # oracle: H0 is diagonal, so the blocks are plain index slices
    idx = part.band_indices
    rest = np.setdiff1d(np.arange(m.dim), idx)
    eP = np.linalg.eigvalsh(H1[np.ix_(idx, idx)])
    eQ = np.linalg.eigvalsh(H1[np.ix_(rest, rest)])
    direct = np.min(np.abs(eP[:, None] - eQ[None, :]))
    assert cert.delta == pytest.approx(direct, rel=1e-12)
    assert cert.delta >= m.metadata["delta0"] - 2.0 - 1e-9
    assert cert.satisfied
