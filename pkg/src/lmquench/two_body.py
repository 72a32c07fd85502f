"""Two bosons on a Lagrange mesh with contact interaction and a central impurity.

The Hamiltonian is the tensor product of two single-particle mesh
Hamiltonians plus ``g/h`` on the coincidence nodes ``x1 == x2``. It is never
diagonalized on the full ``N*N`` product space: states are expanded in an
orthonormal exchange-symmetric basis (unordered node pairs), optionally
further split by total parity ``(x1, x2) -> (-x1, -x2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg

from .lagrange_mesh import Mesh, SymmetricOperator, _fix_sign, kinetic_matrix, potential_diagonal


class EigensolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class TwoBodyConfig:
    mesh: Mesh
    g: float
    kappa: float

    def __post_init__(self):
        if not isinstance(self.mesh, Mesh):
            raise TypeError("mesh must be a Mesh")
        for name in ("g", "kappa"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
            object.__setattr__(self, name, float(v))


@dataclass(frozen=True)
class PairBasis:
    """Isometry from reduced coordinates into the ``N*N`` product grid.

    ``embedding`` is a sparse ``(N*N, dim)`` matrix with orthonormal columns;
    a reduced vector ``v`` becomes the grid ``(embedding @ v).reshape(N, N)``.
    """

    mesh: Mesh
    parity: int | None
    embedding: sp.csr_matrix = field(repr=False)

    @property
    def dimension(self) -> int:
        return self.embedding.shape[1]

    def to_grid(self, vectors: np.ndarray) -> np.ndarray:
        n = self.mesh.n_points
        flat = self.embedding @ vectors
        if flat.ndim == 1:
            return flat.reshape(n, n)
        return flat.T.reshape(-1, n, n)

    def from_grid(self, grid: np.ndarray) -> np.ndarray:
        return self.embedding.T @ np.asarray(grid).reshape(-1)


def pair_basis(mesh: Mesh, parity: int | None = None) -> PairBasis:
    """Exchange-symmetric basis, restricted to one total parity if requested.

    ``parity`` is ``None`` (full bosonic subspace, dimension ``N(N+1)/2``),
    ``+1`` or ``-1``.
    """
    if parity not in (None, 1, -1):
        raise ValueError(f"parity must be None, 1 or -1, got {parity}")
    n = mesh.n_points
    a, b = np.triu_indices(n)
    n_pairs = a.size
    r = 1 / math.sqrt(2)
    diag = a == b
    rows = np.concatenate([a * n + b, (b * n + a)[~diag]])
    cols = np.concatenate([np.arange(n_pairs), np.arange(n_pairs)[~diag]])
    vals = np.concatenate([np.where(diag, 1.0, r), np.full((~diag).sum(), r)])
    sym = sp.csr_matrix((vals, (rows, cols)), shape=(n * n, n_pairs))
    if parity is None:
        return PairBasis(mesh, None, sym)

    # reflected pair {N-1-b, N-1-a}, located in the triu ordering
    pos = -np.ones((n, n), dtype=int)
    pos[a, b] = np.arange(n_pairs)
    partner = pos[n - 1 - b, n - 1 - a]
    fixed = partner == np.arange(n_pairs)
    lead = np.arange(n_pairs) < partner
    q_rows, q_cols, q_vals = [], [], []
    col = 0
    if parity == 1:
        for p in np.flatnonzero(fixed):
            q_rows.append(p); q_cols.append(col); q_vals.append(1.0)
            col += 1
    for p in np.flatnonzero(lead):
        q = partner[p]
        q_rows += [p, q]; q_cols += [col, col]; q_vals += [r, parity * r]
        col += 1
    # keep columns ordered by their first pair index for a stable layout
    q_mat = sp.csr_matrix((q_vals, (q_rows, q_cols)), shape=(n_pairs, col))
    first = np.asarray(q_mat.tocsc().argmax(axis=0)).ravel()
    q_mat = q_mat[:, np.argsort(first, kind="stable")]
    return PairBasis(mesh, parity, (sym @ q_mat).tocsr())


def _product_hamiltonian(config: TwoBodyConfig) -> sp.csr_matrix:
    mesh = config.mesh
    n, h = mesh.n_points, mesh.scaling
    h1 = kinetic_matrix(n).entries / h ** 2 + np.diag(potential_diagonal(mesh, config.kappa))
    h1 = sp.csr_matrix(h1)
    eye = sp.identity(n, format="csr")
    contact = np.zeros(n * n)
    contact[np.arange(n) * (n + 1)] = config.g / h
    return (sp.kron(h1, eye) + sp.kron(eye, h1) + sp.diags(contact)).tocsr()


def assemble_sparse(config: TwoBodyConfig, parity: int | None = None):
    """Reduced two-body Hamiltonian as a sparse matrix, with its basis."""
    basis = pair_basis(config.mesh, parity)
    c = basis.embedding
    return (c.T @ _product_hamiltonian(config) @ c).tocsr(), basis


def assemble_two_body(config: TwoBodyConfig, parity: int | None = None) -> SymmetricOperator:
    """Two-particle mesh Hamiltonian in the bosonic (optionally parity) subspace."""
    reduced, basis = assemble_sparse(config, parity)
    reduced = reduced.toarray()
    # exact symmetry; the sparse triple product is symmetric only to rounding
    reduced = 0.5 * (reduced + reduced.T)
    return SymmetricOperator(reduced, basis=basis)


@dataclass(frozen=True)
class Spectrum:
    """Lowest eigenpairs of a two-body operator.

    ``vectors[:, n]`` are reduced coordinates in ``basis``; use
    :meth:`state_grid` for the ``N x N`` coefficient grid ``Psi_ij``.
    """

    energies: np.ndarray
    vectors: np.ndarray = field(repr=False)
    basis: PairBasis | None = field(default=None, repr=False)
    config: TwoBodyConfig | None = None

    def __len__(self):
        return self.energies.size

    def state_grid(self, n: int) -> np.ndarray:
        if self.basis is None:
            raise ValueError("spectrum has no pair basis attached")
        return self.basis.to_grid(self.vectors[:, n])

    def truncated(self, k: int) -> "Spectrum":
        return Spectrum(self.energies[:k], self.vectors[:, :k], self.basis, self.config)


def eigensolve(operator: SymmetricOperator, k: int | None = None,
               config: TwoBodyConfig | None = None) -> Spectrum:
    """Lowest ``k`` eigenpairs (all if ``k`` is None), ascending.

    Dense LAPACK solve; each eigenvector is signed so that its
    largest-magnitude entry (first on ties) is positive.
    """
    a = operator.entries
    dim = operator.dimension
    if k is None:
        k = dim
    if not 1 <= k <= dim:
        raise ValueError(f"k must be in [1, {dim}], got {k}")
    try:
        if k == dim:
            w, v = scipy.linalg.eigh(a, driver="evd")
        else:
            w, v = scipy.linalg.eigh(a, subset_by_index=[0, k - 1], driver="evr")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigensolverError(
            f"symmetric eigensolve failed (dim={dim}, k={k}, "
            f"finite={np.isfinite(a).all()}): {exc}") from exc
    v = _fix_sign(np.ascontiguousarray(v))
    return Spectrum(w, v, operator.basis, config)


def solve(config: TwoBodyConfig, k: int | None = None, parity: int | None = 1) -> Spectrum:
    """Assemble and diagonalize; even total parity by default."""
    return eigensolve(assemble_two_body(config, parity), k, config)


def ground_state(config: TwoBodyConfig, parity: int | None = 1) -> Spectrum:
    """Lowest eigenpair by sparse Lanczos, without forming the dense matrix."""
    op, basis = assemble_sparse(config, parity)
    op = 0.5 * (op + op.T)
    # fixed start vector keeps the Lanczos run deterministic
    v0 = np.ones(op.shape[0])
    try:
        w, v = scipy.sparse.linalg.eigsh(op, k=1, which="SA", v0=v0, tol=1e-13)
    except scipy.sparse.linalg.ArpackError as exc:
        raise EigensolverError(
            f"Lanczos ground state failed for g={config.g}, kappa={config.kappa}: {exc}") from exc
    v = _fix_sign(v / np.linalg.norm(v))
    return Spectrum(w, v, basis, config)


def initial_ground_state(mesh: Mesh, g: float) -> tuple[float, Spectrum]:
    """Ground state of the unquenched pair (``kappa = 0``).

    Returns ``(E0, spectrum)`` where ``spectrum`` holds the single state in the
    even-parity basis.
    """
    spec = ground_state(TwoBodyConfig(mesh, g, 0.0))
    return float(spec.energies[0]), spec
