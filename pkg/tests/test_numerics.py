import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import charpoly_roots, partial_trace_loops, partial_transpose_loops, random_density, random_hermitian
from qmemory.errors import BadDim, NonHermitian, NotPSD
from qmemory.numerics import (
    SX,
    eigvalsh,
    hermitian_eig,
    nearest_psd,
    partial_trace,
    partial_transpose,
    psd_sqrt,
)

PHI = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
PHI_PROJ = np.outer(PHI, PHI.conj())

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def test_eig_identity():
    np.testing.assert_allclose(hermitian_eig(np.eye(4)).eigenvalues, np.ones(4), atol=1e-15)


def test_eig_pauli_x():
    np.testing.assert_allclose(hermitian_eig(SX).eigenvalues, [1, -1], atol=1e-15)


@pytest.mark.parametrize("seed", range(5))
def test_eig_matches_characteristic_polynomial(seed):
    h = random_hermitian(np.random.default_rng(seed), 4)
    roots = charpoly_roots(h)
    assert len(roots) == 4
    np.testing.assert_allclose(hermitian_eig(h).eigenvalues, roots, atol=1e-9)


def test_eig_rejects_nonhermitian():
    with pytest.raises(NonHermitian):
        hermitian_eig(np.array([[0, 1], [0, 0]]))


def test_eig_dimension_cap():
    with pytest.raises(BadDim):
        hermitian_eig(np.eye(33))


@settings(max_examples=1000, deadline=None)
@given(seeds, st.sampled_from([2, 3, 4]))
def test_eig_reconstruction(seed, n):
    h = random_hermitian(np.random.default_rng(seed), n)
    spec = hermitian_eig(h)
    v = spec.eigenvectors
    assert np.all(np.diff(spec.eigenvalues) <= 0)
    assert np.abs(spec.reconstruct() - h).max() <= 1e-10
    assert np.abs(v.conj().T @ v - np.eye(n)).max() <= 1e-10


def test_eig_degenerate_cluster_projector():
    # eigenvectors inside a degenerate cluster are arbitrary, the projector is not
    rng = np.random.default_rng(3)
    u = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))[0]
    h = u @ np.diag([2.0, 2.0, -1.0, 0.5]) @ u.conj().T
    v = hermitian_eig(h).eigenvectors[:, :2]
    np.testing.assert_allclose(v @ v.conj().T, u[:, :2] @ u[:, :2].conj().T, atol=1e-10)


def test_psd_sqrt_examples():
    np.testing.assert_allclose(psd_sqrt(np.eye(3)), np.eye(3), atol=1e-15)
    np.testing.assert_allclose(psd_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-14)


def test_psd_sqrt_clips_roundoff_and_rejects_negative():
    np.testing.assert_allclose(psd_sqrt(np.diag([1.0, -1e-10])), np.diag([1.0, 0.0]), atol=1e-15)
    with pytest.raises(NotPSD):
        psd_sqrt(np.diag([1.0, -1e-6]))


@settings(max_examples=200, deadline=None)
@given(seeds, st.sampled_from([2, 3, 4]))
def test_psd_sqrt_squares_back_and_commutes(seed, n):
    p = random_density(np.random.default_rng(seed), n) * n
    s = psd_sqrt(p)
    assert np.abs(s @ s - p).max() <= 1e-9
    assert np.abs(s @ p - p @ s).max() <= 1e-9
    assert eigvalsh(s)[-1] >= -1e-12


def test_partial_transpose_examples():
    np.testing.assert_allclose(partial_transpose(np.eye(4) / 4), np.eye(4) / 4)
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(partial_transpose(PHI_PROJ))), [-0.5, 0.5, 0.5, 0.5], atol=1e-15)
    swap = np.eye(4)[[0, 2, 1, 3]]
    np.testing.assert_allclose(partial_transpose(PHI_PROJ), swap / 2)


def test_partial_transpose_product():
    rng = np.random.default_rng(1)
    a, b = random_density(rng, 2), random_density(rng, 2)
    np.testing.assert_allclose(partial_transpose(np.kron(a, b)), np.kron(a, b.T), atol=1e-15)
    np.testing.assert_allclose(partial_transpose(np.kron(a, b), "first"), np.kron(a.T, b), atol=1e-15)


def test_partial_transpose_bad_dim():
    with pytest.raises(BadDim):
        partial_transpose(np.eye(2))
    with pytest.raises(BadDim):
        partial_trace(np.eye(8))


@settings(max_examples=1000, deadline=None)
@given(seeds)
def test_partial_transpose_properties(seed):
    h = random_hermitian(np.random.default_rng(seed), 4)
    pt = partial_transpose(h)
    np.testing.assert_allclose(pt, partial_transpose_loops(h), atol=0)
    assert abs(np.trace(pt) - np.trace(h)) <= 1e-12
    assert np.abs(pt - pt.conj().T).max() <= 1e-12
    np.testing.assert_allclose(partial_transpose(pt), h, atol=0)


def test_partial_trace_examples():
    np.testing.assert_allclose(partial_trace(PHI_PROJ, "first"), np.eye(2) / 2, atol=1e-15)
    rng = np.random.default_rng(2)
    a, b = random_density(rng, 2), random_density(rng, 2)
    np.testing.assert_allclose(partial_trace(np.kron(a, b), "second"), b, atol=1e-15)
    np.testing.assert_allclose(partial_trace(np.kron(a, b), "first"), a, atol=1e-15)


@settings(max_examples=300, deadline=None)
@given(seeds)
def test_partial_trace_matches_loops(seed):
    rho = random_density(np.random.default_rng(seed), 4)
    for keep in ("first", "second"):
        red = partial_trace(rho, keep)
        assert np.abs(red - partial_trace_loops(rho, keep)).max() <= 1e-12
        assert abs(np.trace(red) - np.trace(rho)) <= 1e-12
        assert np.abs(red - red.conj().T).max() <= 1e-15


def test_nearest_psd_examples():
    rho = random_density(np.random.default_rng(0), 4)
    np.testing.assert_allclose(nearest_psd(rho), rho, atol=1e-14)
    np.testing.assert_allclose(nearest_psd(np.diag([1.0, -1.0])), np.diag([1.0, 0.0]), atol=1e-15)
    with pytest.raises(NonHermitian):
        nearest_psd(np.array([[0, 1], [0, 0]]))


@pytest.mark.parametrize("seed", range(5))
def test_nearest_psd_sampled_optimality(seed):
    rng = np.random.default_rng(seed)
    h = random_hermitian(rng, 3)
    p = nearest_psd(h)
    assert eigvalsh(p)[-1] >= -1e-12
    d0 = np.linalg.norm(h - p)
    for _ in range(2000):
        g = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        x = g @ g.conj().T * rng.uniform(0, 1)
        # also probe small perturbations around the candidate
        y = nearest_psd(p + 1e-3 * random_hermitian(rng, 3))
        assert d0 <= np.linalg.norm(h - x) + 1e-12
        assert d0 <= np.linalg.norm(h - y) + 1e-12
