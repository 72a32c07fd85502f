import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lmquench.lagrange_mesh import (ZETA_HALF, Mesh, PhysicalCouplings, build_mesh,
                                    g1d_from_scattering, interpolate, kinetic_matrix,
                                    lagrange_function, potential_diagonal,
                                    single_particle_hamiltonian, single_particle_spectrum)

from oracles import fd_delta_trap

odd_sizes = st.integers(min_value=1, max_value=60).map(lambda m: 2 * m + 1)


@pytest.mark.parametrize("n, h, expected", [
    (3, 1.0, [-1.0, 0.0, 1.0]),
    (5, 0.5, [-1.0, -0.5, 0.0, 0.5, 1.0]),
])
def test_build_mesh_nodes(n, h, expected):
    np.testing.assert_array_equal(build_mesh(n, h).nodes, expected)


@pytest.mark.parametrize("n, h", [(4, 1.0), (1, 1.0), (5, 0.0), (5, -0.1), (5, math.nan),
                                  (5.5, 1.0)])
def test_build_mesh_rejects(n, h):
    with pytest.raises(ValueError):
        build_mesh(n, h)


@given(odd_sizes, st.floats(min_value=1e-3, max_value=10))
def test_mesh_invariants(n, h):
    mesh = build_mesh(n, h)
    x = mesh.nodes
    assert x[mesh.center] == 0.0
    np.testing.assert_array_equal(x, -x[::-1])
    assert np.all(np.diff(x) > 0)
    np.testing.assert_allclose(np.diff(x), h, rtol=1e-12)
    with pytest.raises(ValueError):
        x[0] = 1.0  # read-only


def test_kinetic_examples():
    # pi^2/6 (1 - 1/121) and -(pi^2/9) cos(pi/3) / sin^2(pi/3), evaluated by hand
    assert kinetic_matrix(11).entries[4, 4] == pytest.approx(1.6313396, abs=1e-6)
    assert kinetic_matrix(3).entries[0, 1] == pytest.approx(-0.7310818, abs=1e-6)


@given(odd_sizes)
def test_kinetic_symmetric_toeplitz(n):
    t = kinetic_matrix(n).entries
    np.testing.assert_array_equal(t, t.T)
    for d in range(n):
        diag = np.diagonal(t, d)
        assert np.all(diag == diag[0])
    assert t[0, 0] > 0


def test_potential_examples():
    mesh = build_mesh(11, 0.2)
    v = potential_diagonal(mesh, 0.0)
    assert v[mesh.center + 5] == pytest.approx(0.5)
    assert potential_diagonal(mesh, 0.7)[mesh.center] == pytest.approx(3.5)
    assert np.all(v >= 0)


def test_harmonic_ladder(default_mesh):
    h = single_particle_hamiltonian(default_mesh, 0.0)
    np.testing.assert_array_equal(h.entries, h.entries.T)
    w = np.linalg.eigvalsh(h.entries)
    assert w[0] == pytest.approx(0.5, abs=1e-8)
    np.testing.assert_allclose(w[:10], np.arange(10) + 0.5, atol=1e-6)


@pytest.mark.parametrize("n, h", [(61, 0.25), (81, 0.2), (121, 0.15)])
def test_ladder_on_resolved_meshes(n, h):
    w = single_particle_spectrum(build_mesh(n, h), 0.0).energies
    np.testing.assert_allclose(w[:10], np.arange(10) + 0.5, atol=1e-6)


@pytest.mark.parametrize("kappa", [-5.0, -0.7, 0.7, 5.0, 30.0])
def test_parity_structure(default_mesh, kappa):
    spec = single_particle_spectrum(default_mesh, kappa)
    free = single_particle_spectrum(default_mesh, 0.0)
    odd = spec.parity == -1
    c = default_mesh.center
    assert np.all(spec.vectors[c, odd] == 0.0)
    np.testing.assert_array_equal(spec.energies[odd], free.energies[free.parity == -1])
    reflected = spec.vectors[::-1]
    np.testing.assert_allclose(reflected, spec.vectors * spec.parity, atol=1e-12)
    gram = spec.vectors.T @ spec.vectors
    np.testing.assert_allclose(gram, np.eye(gram.shape[0]), atol=1e-10)


def test_split_trap_pairing():
    # a very strong impurity pairs each even level with the odd level below;
    # the mesh delta closes the gap only linearly in h
    gaps = []
    for n, h in [(121, 0.15), (181, 0.1)]:
        e = single_particle_spectrum(build_mesh(n, h), 1e3).energies
        np.testing.assert_allclose(e[0::2][:4], [1.5, 3.5, 5.5, 7.5], atol=1e-8)
        gaps.append(e[1] - e[0])
    assert 0 < gaps[1] < gaps[0] < 0.05
    assert fd_delta_trap(1e3)[0] == pytest.approx(1.5, abs=5e-3)


@pytest.mark.parametrize("kappa", [0.7, 5.0, -0.7])
def test_delta_levels_approach_oracle(kappa):
    exact = fd_delta_trap(kappa, 3)
    errors = []
    for n, h in [(61, 0.3), (121, 0.15), (241, 0.075)]:
        spec = single_particle_spectrum(build_mesh(n, h), kappa)
        errors.append(np.max(np.abs(spec.energies[spec.parity == 1][:3] - exact)))
    # first-order convergence of the mesh delta
    assert errors[0] > errors[1] > errors[2]
    assert errors[1] / errors[2] == pytest.approx(2.0, rel=0.25)


def test_interpolation_conditions():
    mesh = build_mesh(21, 0.3)
    for i in (0, 7, mesh.center, 20):
        e = np.zeros(21)
        e[i] = 1.0
        values = interpolate(mesh, e, mesh.nodes)
        expected = np.zeros(21)
        expected[i] = 1 / math.sqrt(mesh.scaling)
        np.testing.assert_allclose(values, expected, atol=1e-14)


def test_lagrange_function_limits():
    assert lagrange_function(11, 0.0) == 1.0
    assert lagrange_function(11, 11.0) == 1.0
    np.testing.assert_array_equal(lagrange_function(11, np.arange(1, 11)), 0.0)


def test_interpolated_ground_state(default_mesh):
    spec = single_particle_spectrum(default_mesh, 0.0)
    psi0 = spec.vectors[:, 0]
    assert interpolate(default_mesh, psi0, 0.0) == pytest.approx(math.pi ** -0.25, abs=1e-6)
    x = np.linspace(-3, 3, 13) + 0.037
    np.testing.assert_allclose(interpolate(default_mesh, psi0, x),
                               math.pi ** -0.25 * np.exp(-x ** 2 / 2), atol=1e-6)


@given(st.integers(0, 120))
def test_interpolate_reproduces_nodal_values(j):
    mesh = build_mesh(121, 0.15)
    spec = single_particle_spectrum(mesh, 2.0)
    c = spec.vectors[:, 3]
    assert interpolate(mesh, c, mesh.nodes[j]) == pytest.approx(c[j] / math.sqrt(0.15),
                                                                 abs=1e-12)


def test_g1d_examples():
    assert g1d_from_scattering(PhysicalCouplings(0.0, 1.0)) == 0.0
    base = 4 * 0.1  # prefactor 4 a3d / d_perp^2 with unit constants
    assert g1d_from_scattering(PhysicalCouplings(0.1, 1.0)) / base == pytest.approx(
        1 / (1 - 0.14603), rel=1e-12)
    assert 1 / (1 - 0.14603) == pytest.approx(1.17101, abs=1e-5)
    with pytest.raises(ValueError, match="resonance"):
        g1d_from_scattering(PhysicalCouplings(1 / ZETA_HALF, 1.0))


def test_mesh_is_hashable_value():
    assert build_mesh(5, 0.5) == Mesh(5, 0.5)
    assert len({build_mesh(5, 0.5), build_mesh(5, 0.5)}) == 1
