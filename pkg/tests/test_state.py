import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dense_gell_mann
from quditmeas.errors import InvalidDimensionError
from quditmeas.state import (bloch_populations, bloch_to_density, bnorm, btrace, clamp_state,
                             density_to_bloch, dominant_amplitudes, gell_mann_basis, normalize,
                             pure_density, purity, random_density, rowdot, seqsum, validate_state)

PAULI = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]])


def test_qubit_basis_is_pauli_xyz():
    b = gell_mann_basis(2)
    np.testing.assert_array_equal(b.matrices, PAULI)
    assert b.labels == (("sym", 0, 1), ("asym", 1, 0), ("diag", 0))


@pytest.mark.parametrize("N", [2, 3, 4, 6])
def test_basis_matches_outer_product_construction(N):
    np.testing.assert_allclose(gell_mann_basis(N).matrices, dense_gell_mann(N), atol=1e-15)


@pytest.mark.parametrize("N", [2, 3, 5])
def test_basis_hermitian_traceless_orthonormal(N):
    L = gell_mann_basis(N).matrices
    assert L.shape == (N * N - 1, N, N)
    np.testing.assert_allclose(L, np.conj(np.swapaxes(L, 1, 2)), atol=0)
    np.testing.assert_allclose(np.trace(L, axis1=1, axis2=2), 0, atol=1e-15)
    gram = np.einsum("aij,bji->ab", L, L)
    np.testing.assert_allclose(gram, 2 * np.eye(N * N - 1), atol=1e-12)


def test_basis_n3_all_64_pairs():
    L = gell_mann_basis(3).matrices
    for i in range(8):
        for j in range(8):
            assert abs(np.trace(L[i] @ L[j]) - 2 * (i == j)) < 1e-12


@pytest.mark.parametrize("N", [1, 0, -3])
def test_basis_rejects_small_dimension(N):
    with pytest.raises(InvalidDimensionError):
        gell_mann_basis(N)


def test_index_map_is_bijective_and_stable():
    b = gell_mann_basis(4)
    assert sorted(b.index_map.values()) == list(range(15))
    assert b.pair_index(0, 1) == 0 and b.pair_index(1, 0) == 6 and b.diag_index(0) == 12
    assert [p[2:] for p in b.pairs()][:2] == [(0, 6), (1, 7)]
    s1, s2 = b.to_json(), gell_mann_basis(4).to_json()
    assert s1.encode() == s2.encode()
    assert json.loads(s1)[0] == ["sym", 0, 1]
    with pytest.raises(ValueError):
        b.pair_index(2, 2)


def test_basis_matrices_read_only():
    with pytest.raises(ValueError):
        gell_mann_basis(3).matrices[0, 0, 0] = 5


@pytest.mark.parametrize("N", [2, 3, 6])
def test_maximally_mixed_is_origin(N):
    np.testing.assert_allclose(density_to_bloch(np.eye(N) / N), 0, atol=1e-15)
    np.testing.assert_allclose(bloch_to_density(np.zeros(N * N - 1)), np.eye(N) / N, atol=1e-15)


def test_plus_state_is_x():
    plus = np.full((2, 2), 0.5)
    np.testing.assert_allclose(density_to_bloch(plus), [1, 0, 0], atol=1e-15)


def test_y_axis_density():
    rho = bloch_to_density([0, 1, 0])
    np.testing.assert_allclose(rho, [[0.5, -0.5j], [0.5j, 0.5]], atol=1e-15)


def test_bloch_sign_convention_for_pairs():
    rng = np.random.default_rng(3)
    rho = random_density(4, rng)
    q = density_to_bloch(rho)
    for m, n, i_mn, i_nm in gell_mann_basis(4).pairs():
        assert q[i_mn] == pytest.approx(2 * rho[m, n].real, abs=1e-14)
        assert q[i_nm] == pytest.approx(-2 * rho[m, n].imag, abs=1e-14)


def test_round_trip_100_random_n4():
    rng = np.random.default_rng(11)
    for _ in range(100):
        rho = random_density(4, rng)
        np.testing.assert_allclose(bloch_to_density(density_to_bloch(rho)), rho, atol=1e-10)


def test_batched_round_trip_matches_loop():
    rng = np.random.default_rng(5)
    rhos = np.array([random_density(3, rng) for _ in range(9)])
    q = density_to_bloch(rhos)
    assert q.shape == (9, 8)
    for k in range(9):
        np.testing.assert_array_equal(q[k], density_to_bloch(rhos[k]))
    np.testing.assert_allclose(bloch_to_density(q), rhos, atol=1e-14)


def test_density_to_bloch_rejects_non_hermitian():
    with pytest.raises(ValueError, match="imaginary"):
        density_to_bloch(np.array([[0.5, 0.3], [0.1, 0.5]]))


def test_dimension_mismatch():
    with pytest.raises(InvalidDimensionError):
        density_to_bloch(np.eye(3) / 3, basis=gell_mann_basis(2))
    with pytest.raises(InvalidDimensionError):
        bloch_to_density(np.zeros(5))
    with pytest.raises(InvalidDimensionError):
        density_to_bloch(np.ones(4))


def test_over_long_bloch_vector_flagged():
    q = np.array([np.sqrt(3), 0, 0])  # |q|^2 = 3 > 1
    rho = bloch_to_density(q)
    d = validate_state(rho)
    assert d.hermiticity == 0 and d.trace < 1e-15
    assert d.min_eigenvalue == pytest.approx(0.5 - np.sqrt(3) / 2, abs=1e-14)
    assert not d.ok()


def test_validate_state_defects():
    assert validate_state(np.eye(2) / 2) == (0.0, 0.0, 0.5)
    rho = np.array([[0.5, 0.2 + 0.1j], [0.2, 0.5]])
    assert validate_state(rho).hermiticity == pytest.approx(abs(0.2 + 0.1j - 0.2))


def test_bloch_populations_match_diagonal():
    rng = np.random.default_rng(8)
    rhos = np.array([random_density(5, rng) for _ in range(4)])
    np.testing.assert_allclose(bloch_populations(density_to_bloch(rhos)),
                               np.real(np.diagonal(rhos, axis1=1, axis2=2)), atol=1e-14)


def test_purity_values():
    assert purity(pure_density([1, 1j])) == pytest.approx(1.0)
    assert purity(np.eye(5) / 5) == pytest.approx(0.2)
    assert purity(np.diag([0.5, 0.5, 0])) == pytest.approx(0.5)


@settings(max_examples=60, deadline=None)
@given(N=st.integers(2, 6), seed=st.integers(0, 2**32 - 1), rank=st.integers(1, 6))
def test_purity_bloch_identity(N, seed, rank):
    rho = random_density(N, np.random.default_rng(seed), rank=min(rank, N))
    q = density_to_bloch(rho)
    assert purity(rho) == pytest.approx(1 / N + q @ q / 2, abs=1e-10)
    assert q @ q <= 2 * (1 - 1 / N) + 1e-9
    np.testing.assert_allclose(bloch_to_density(q), rho, atol=1e-10)


def test_dominant_amplitudes_recovers_pure_state():
    c = normalize(np.array([0.3 + 0.1j, -0.5j, 0.8]))
    d = dominant_amplitudes(pure_density(c))
    assert abs(abs(np.vdot(d, c)) - 1) < 1e-12
    with pytest.raises(ValueError):
        dominant_amplitudes(np.eye(3) / 3)


def test_clamp_state_projects_negative_eigenvalue():
    rho = bloch_to_density([1.2, 0, 0])
    clamped = clamp_state(rho)
    d = validate_state(clamped)
    assert d.min_eigenvalue >= -1e-12 and d.trace < 1e-12
    assert np.allclose(clamp_state(np.eye(2) / 2), np.eye(2) / 2)


def test_batch_independent_reductions():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(7, 6)) + 1j * rng.normal(size=(7, 6))
    A = rng.normal(size=(4, 6))
    for k in range(7):
        assert np.array_equal(seqsum(x)[k], seqsum(x[k:k + 1])[0])
        assert np.array_equal(rowdot(x, A)[k], rowdot(x[k], A))
        assert np.array_equal(bnorm(x)[k], bnorm(x[k]))
    m = rng.normal(size=(3, 4, 4))
    np.testing.assert_allclose(btrace(m), np.trace(m, axis1=1, axis2=2), atol=1e-14)
    np.testing.assert_allclose(seqsum(x, axis=0), x.sum(axis=0), atol=1e-13)
