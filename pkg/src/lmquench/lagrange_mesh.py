"""Single-particle Lagrange-mesh machinery on a uniform Cartesian grid.

Nodes sit at ``h * j`` for ``j = -(N-1)/2 ... (N-1)/2`` with ``N`` odd, so the
origin is always a node and a point impurity is represented on exactly one
quadrature point. The Lagrange functions are the periodic Fourier (sinc-like)
functions; with unit weights the coefficient vector ``c`` of a state is
unit-norm in the plain Euclidean sum, and wavefunction values at the nodes are
``c / sqrt(h)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# zeta(1/2) in absolute value, the confinement-induced resonance constant
ZETA_HALF = 1.4603


@dataclass(frozen=True)
class Mesh:
    """Scaled uniform Lagrange mesh.

    Parameters
    ----------
    n_points : int
        Number of nodes, odd and at least 3.
    scaling : float
        Node spacing ``h`` in oscillator lengths.
    """

    n_points: int
    scaling: float
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = self.n_points
        if isinstance(n, bool) or int(n) != n:
            raise ValueError(f"n_points must be an integer, got {n!r}")
        if n < 3:
            raise ValueError(f"n_points must be >= 3, got {n}")
        if n % 2 == 0:
            raise ValueError(
                f"n_points must be odd so that a node sits at the origin, got {n}")
        if not (np.isfinite(self.scaling) and self.scaling > 0):
            raise ValueError(f"scaling must be positive, got {self.scaling}")
        object.__setattr__(self, "n_points", int(n))
        object.__setattr__(self, "scaling", float(self.scaling))
        nodes = self.scaling * self.indices.astype(float)
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def indices(self) -> np.ndarray:
        """Integer node labels ``j``, centred on zero."""
        half = (self.n_points - 1) // 2
        return np.arange(-half, half + 1)

    @property
    def center(self) -> int:
        """Array position of the origin node."""
        return (self.n_points - 1) // 2

    @property
    def half_width(self) -> float:
        return self.scaling * (self.n_points - 1) / 2

    def key(self) -> tuple[int, float]:
        return (self.n_points, self.scaling)


@dataclass(frozen=True)
class SymmetricOperator:
    """Real symmetric matrix, stored dense.

    ``basis`` optionally holds the sparse isometry that embeds the operator's
    coordinates into a larger product space (used by the two-body code).
    """

    entries: np.ndarray
    basis: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"operator must be square, got shape {a.shape}")
        if not np.array_equal(a, a.T):
            raise ValueError("operator entries are not exactly symmetric")
        object.__setattr__(self, "entries", a)

    @property
    def dimension(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class PhysicalCouplings:
    """Inputs of the quasi-1D coupling formula, in any consistent unit system."""

    a3d: float
    d_perp: float
    mass: float = 1.0
    hbar: float = 1.0
    constant_C: float = ZETA_HALF

    def __post_init__(self):
        if not self.d_perp > 0:
            raise ValueError(f"d_perp must be positive, got {self.d_perp}")
        if not self.mass > 0:
            raise ValueError(f"mass must be positive, got {self.mass}")


def build_mesh(n_points: int, scaling: float) -> Mesh:
    """Return the uniform mesh with ``n_points`` (odd) nodes spaced by ``scaling``."""
    return Mesh(n_points, scaling)


def _kinetic_band(n_points: int) -> np.ndarray:
    # first row of the Toeplitz kinetic matrix, indexed by |i - j|
    d = np.arange(n_points)
    band = np.empty(n_points)
    band[0] = math.pi ** 2 / 6 * (1 - 1 / n_points ** 2)
    k = d[1:]
    arg = math.pi * k / n_points
    sign = np.where(k % 2 == 0, 1.0, -1.0)
    band[1:] = sign * (math.pi ** 2 / n_points ** 2) * np.cos(arg) / np.sin(arg) ** 2
    return band


def kinetic_matrix(n_points: int) -> SymmetricOperator:
    """Matrix of ``-1/2 d^2/dx^2`` in the unit-spacing Fourier Lagrange basis.

    Unscaled: on a mesh with spacing ``h`` divide by ``h**2``.
    """
    if n_points < 3:
        raise ValueError(f"n_points must be >= 3, got {n_points}")
    band = _kinetic_band(n_points)
    i = np.arange(n_points)
    return SymmetricOperator(band[np.abs(i[:, None] - i[None, :])])


def potential_diagonal(mesh: Mesh, kappa: float) -> np.ndarray:
    """Harmonic trap plus a central delta of strength ``kappa`` on the nodes.

    The delta carries weight ``kappa / h`` on the origin node, which is its
    exact matrix element in the scaled Lagrange basis.
    """
    v = 0.5 * mesh.nodes ** 2
    v[mesh.center] += kappa / mesh.scaling
    return v


def single_particle_hamiltonian(mesh: Mesh, kappa: float) -> SymmetricOperator:
    t = kinetic_matrix(mesh.n_points).entries / mesh.scaling ** 2
    h = t + np.diag(potential_diagonal(mesh, kappa))
    return SymmetricOperator(h)


def parity_basis(n_points: int) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal even and odd combinations of the node basis.

    Returns ``(even, odd)`` with shapes ``(N, (N+1)/2)`` and ``(N, (N-1)/2)``.
    Columns of ``odd`` vanish identically on the origin node.
    """
    half = (n_points - 1) // 2
    c = half
    even = np.zeros((n_points, half + 1))
    odd = np.zeros((n_points, half))
    even[c, 0] = 1.0
    r = 1 / math.sqrt(2)
    for j in range(1, half + 1):
        even[c + j, j] = even[c - j, j] = r
        odd[c + j, j - 1] = r
        odd[c - j, j - 1] = -r
    return even, odd


@dataclass(frozen=True)
class SingleParticleSpectrum:
    """All eigenpairs of a single-particle mesh Hamiltonian.

    ``vectors[:, n]`` is the unit-norm coefficient vector of level ``n``;
    ``parity[n]`` is +1 or -1.
    """

    mesh: Mesh
    kappa: float
    energies: np.ndarray
    vectors: np.ndarray
    parity: np.ndarray


def _fix_sign(vectors: np.ndarray) -> np.ndarray:
    # largest-magnitude entry positive; argmax returns the first index on ties
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def single_particle_spectrum(mesh: Mesh, kappa: float) -> SingleParticleSpectrum:
    """Diagonalize the single-particle Hamiltonian block by block in parity.

    Odd levels never see the impurity, so their energies are bitwise
    independent of ``kappa`` and their origin coefficient is exactly zero.
    """
    h = single_particle_hamiltonian(mesh, kappa).entries
    even, odd = parity_basis(mesh.n_points)
    parts = []
    for basis, p in ((even, 1), (odd, -1)):
        block = basis.T @ h @ basis
        block = 0.5 * (block + block.T)
        w, v = np.linalg.eigh(block)
        parts.append((w, basis @ v, np.full(w.size, p)))
    energies = np.concatenate([p[0] for p in parts])
    vectors = np.concatenate([p[1] for p in parts], axis=1)
    parity = np.concatenate([p[2] for p in parts])
    order = np.argsort(energies, kind="stable")
    vectors = _fix_sign(vectors[:, order])
    return SingleParticleSpectrum(mesh, float(kappa), energies[order], vectors,
                                  parity[order])


def lagrange_function(n_points: int, u) -> np.ndarray:
    """Fourier Lagrange function centred at 0 on the unit grid, ``f(u)``.

    Equals 1 at ``u = 0`` and 0 at every other integer (mod ``N``).
    """
    u = np.asarray(u, dtype=float)
    num = np.sin(math.pi * u)
    den = n_points * np.sin(math.pi * u / n_points)
    # removable singularities at u = m*N: limit value is (-1)^(m*(N-1)) = 1 for odd N
    near = np.abs(den) < 1e-12
    out = np.where(near, 1.0, num / np.where(near, 1.0, den))
    # round off at exact integers away from the centre
    ints = (u == np.round(u)) & ~near
    return np.where(ints, 0.0, out)


def interpolate(mesh: Mesh, coefficients, x):
    """Evaluate the Lagrange-mesh wavefunction at physical position(s) ``x``.

    Uses the exact Fourier basis, so at a node the result is
    ``coefficient / sqrt(h)``.
    """
    c = np.asarray(coefficients)
    if c.shape[0] != mesh.n_points:
        raise ValueError(
            f"expected {mesh.n_points} coefficients, got {c.shape[0]}")
    x = np.asarray(x, dtype=float)
    u = x[..., None] / mesh.scaling - mesh.indices
    f = lagrange_function(mesh.n_points, u)
    return (f @ c) / math.sqrt(mesh.scaling)


def g1d_from_scattering(p: PhysicalCouplings, tol: float = 1e-12) -> float:
    """Effective 1D coupling from the 3D scattering length.

    Raises ``ValueError`` at the confinement-induced resonance, where
    ``1 - C a3d / d_perp`` vanishes.
    """
    ratio = p.a3d / p.d_perp
    denom = 1 - p.constant_C * ratio
    if abs(denom) < tol:
        raise ValueError(
            f"confinement-induced resonance: 1 - C*a3d/d_perp = {denom:.3e}")
    return 4 * p.hbar ** 2 * p.a3d / (p.mass * p.d_perp ** 2) / denom
