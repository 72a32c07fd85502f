import numpy as np
import pytest
from hypothesis import given, strategies as st

from lmquench.lagrange_mesh import SymmetricOperator, build_mesh, single_particle_spectrum
from lmquench.quench_dynamics import compute_overlaps
from lmquench.two_body import (EigensolverError, TwoBodyConfig, assemble_two_body, eigensolve,
                               ground_state, initial_ground_state, pair_basis, solve)


@pytest.fixture(scope="module")
def mid_mesh():
    # half-width 7 at h = 0.35: trap levels below ~10 resolved to ~1e-9
    return build_mesh(41, 0.35)


def test_config_validation(small_mesh):
    with pytest.raises(ValueError):
        TwoBodyConfig(small_mesh, float("nan"), 0.0)
    with pytest.raises(ValueError):
        TwoBodyConfig(small_mesh, 1.0, float("inf"))
    with pytest.raises(TypeError):
        TwoBodyConfig((25, 0.35), 1.0, 0.0)


@pytest.mark.parametrize("parity, dim", [(None, 325), (1, 169), (-1, 156)])
def test_pair_basis_is_isometry(small_mesh, parity, dim):
    basis = pair_basis(small_mesh, parity)
    assert basis.dimension == dim
    c = basis.embedding.toarray()
    np.testing.assert_allclose(c.T @ c, np.eye(dim), atol=1e-14)
    grids = basis.to_grid(np.eye(dim))
    np.testing.assert_array_equal(grids, grids.transpose(0, 2, 1))
    if parity is not None:
        np.testing.assert_array_equal(grids[:, ::-1, ::-1], parity * grids)


def test_parity_sectors_split_bosonic_space(small_mesh):
    even = pair_basis(small_mesh, 1).embedding.toarray()
    odd = pair_basis(small_mesh, -1).embedding.toarray()
    n = small_mesh.n_points
    assert even.shape[1] + odd.shape[1] == n * (n + 1) // 2
    np.testing.assert_allclose(even.T @ odd, 0.0, atol=1e-15)


def test_noninteracting_spectrum(mid_mesh):
    spec = solve(TwoBodyConfig(mid_mesh, 0.0, 0.0), k=12, parity=None)
    # (n + 1/2) + (m + 1/2) with n <= m: multiplicities 1, 1, 2, 2, 3, 3
    np.testing.assert_allclose(spec.energies, [1, 2, 3, 3, 4, 4, 5, 5, 5, 6, 6, 6], atol=1e-8)


def test_ground_state_of_default_mesh(default_mesh):
    e0, psi = initial_ground_state(default_mesh, 0.0)
    assert e0 == pytest.approx(1.0, abs=1e-6)
    grid = psi.state_grid(0)
    np.testing.assert_array_equal(grid, grid.T)
    assert np.linalg.norm(grid) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("g, kappa", [(0.0, 0.0), (1.0, 0.0), (2.5, 0.7), (10.0, -5.0)])
def test_states_symmetric_orthonormal_definite_parity(small_mesh, g, kappa):
    spec = solve(TwoBodyConfig(small_mesh, g, kappa), parity=None)
    assert np.all(np.diff(spec.energies) >= 0)
    v = spec.vectors
    np.testing.assert_allclose(v.T @ v, np.eye(v.shape[1]), atol=1e-8)
    grids = spec.basis.to_grid(v[:, :40])
    np.testing.assert_array_equal(grids, grids.transpose(0, 2, 1))
    for grid in grids:
        flipped = grid[::-1, ::-1]
        even = np.allclose(flipped, grid, atol=1e-8)
        odd = np.allclose(flipped, -grid, atol=1e-8)
        # states of an accidentally degenerate pair may mix parities
        if not (even or odd):
            assert np.min(np.abs(np.diff(spec.energies))) < 1e-8
        else:
            assert even != odd


def test_ground_state_is_even(small_mesh):
    full = solve(TwoBodyConfig(small_mesh, 0.0, 0.0), k=1, parity=None)
    grid = full.state_grid(0)
    np.testing.assert_allclose(grid[::-1, ::-1], grid, atol=1e-12)
    even = ground_state(TwoBodyConfig(small_mesh, 0.0, 0.0))
    assert even.energies[0] == pytest.approx(full.energies[0], abs=1e-10)


@pytest.mark.parametrize("kappa", [0.7, -5.0, 20.0])
def test_parity_selection_on_full_bosonic_basis(small_mesh, kappa):
    g = 2.0
    e0, psi0 = initial_ground_state(small_mesh, g)
    full = solve(TwoBodyConfig(small_mesh, g, kappa), parity=None)
    result = compute_overlaps((e0, psi0), full, threshold=None, trim=False)
    odd = np.array([np.allclose(full.state_grid(n)[::-1, ::-1], -full.state_grid(n),
                                atol=1e-8) for n in range(len(full))])
    assert odd.sum() == pair_basis(small_mesh, -1).dimension
    np.testing.assert_allclose(result.overlaps[odd], 0.0, atol=1e-10)
    # the even sector alone carries the same weights
    even = compute_overlaps((e0, psi0), solve(TwoBodyConfig(small_mesh, g, kappa)),
                            threshold=None, trim=False)
    np.testing.assert_allclose(np.sort(even.weights), np.sort(result.weights[~odd]),
                               atol=1e-12)


def test_ground_energy_monotone_in_g(small_mesh):
    gs = np.linspace(0, 20, 11)
    e = [initial_ground_state(small_mesh, g)[0] for g in gs]
    assert np.all(np.diff(e) > 0)


@pytest.mark.parametrize("kappa", [0.7, 5.0, 30.0])
def test_repulsive_impurity_raises_ground_energy(small_mesh, kappa):
    for g in (0.0, 2.5):
        e0 = initial_ground_state(small_mesh, g)[0]
        assert ground_state(TwoBodyConfig(small_mesh, g, kappa)).energies[0] > e0


@pytest.mark.parametrize("kappa", [-5.0, 0.7, 20.0])
def test_odd_odd_levels_ignore_impurity(mid_mesh, kappa):
    # at g = 0 both atoms in odd orbitals never touch the origin
    odd = single_particle_spectrum(mid_mesh, 0.0)
    eps = odd.energies[odd.parity == -1][:3]
    sums = sorted({eps[i] + eps[j] for i in range(3) for j in range(i, 3)})
    e = solve(TwoBodyConfig(mid_mesh, 0.0, kappa), parity=1).energies
    for s in sums:
        assert np.min(np.abs(e - s)) < 1e-10


def test_eigensolve_diagonal_operator():
    d = np.arange(8.0)[::-1]
    spec = eigensolve(SymmetricOperator(np.diag(d)), k=5)
    np.testing.assert_array_equal(spec.energies, np.arange(5.0))
    np.testing.assert_array_equal(np.abs(spec.vectors), np.eye(8)[:, ::-1][:, :5])
    assert np.all(spec.vectors.max(axis=0) == 1.0)


def test_eigensolve_validates_k():
    op = SymmetricOperator(np.eye(3))
    for k in (0, 4):
        with pytest.raises(ValueError):
            eigensolve(op, k=k)


def test_eigensolve_reports_failure():
    a = np.eye(3)
    a[0, 0] = np.inf
    with pytest.raises(EigensolverError, match="dim=3"):
        eigensolve(SymmetricOperator(a))


def test_eigensolve_bitwise_reproducible(small_mesh):
    op = assemble_two_body(TwoBodyConfig(small_mesh, 2.5, 0.7), parity=1)
    a, b = eigensolve(op), eigensolve(op)
    assert a.energies.tobytes() == b.energies.tobytes()
    assert a.vectors.tobytes() == b.vectors.tobytes()


@given(st.integers(min_value=2, max_value=12), st.integers(0, 2 ** 31 - 1))
def test_sign_convention(n, seed):
    m = np.random.default_rng(seed).normal(size=(n, n))
    spec = eigensolve(SymmetricOperator(m + m.T))
    idx = np.argmax(np.abs(spec.vectors), axis=0)
    assert np.all(spec.vectors[idx, np.arange(n)] > 0)


def test_partial_and_full_solves_agree(small_mesh):
    op = assemble_two_body(TwoBodyConfig(small_mesh, 1.0, -0.7), parity=1)
    full, part = eigensolve(op), eigensolve(op, k=10)
    np.testing.assert_allclose(part.energies, full.energies[:10], atol=1e-10)
    np.testing.assert_allclose(np.abs(part.vectors.T @ full.vectors[:, :10]), np.eye(10),
                               atol=1e-8)


def test_sparse_ground_state_matches_dense(small_mesh):
    cfg = TwoBodyConfig(small_mesh, 2.5, -5.0)
    dense = solve(cfg, k=1)
    sparse = ground_state(cfg)
    assert sparse.energies[0] == pytest.approx(dense.energies[0], abs=1e-10)
    assert abs(sparse.vectors[:, 0] @ dense.vectors[:, 0]) == pytest.approx(1.0, abs=1e-10)
