"""Mesh-convergence diagnostics.

The sinc-type mesh converges exponentially for smooth potentials, but a
contact term sits on a kink of the wavefunction and the energy error then
falls off only linearly in the node spacing ``h``. Two tools follow from
that:

* :func:`convergence_report` tabulates ``E0``, ``E'0`` and the mean echo
  over ``(N, h)`` and flags settings whose successive differences exceed a
  tolerance;
* :func:`extrapolate_energy` removes the leading ``h`` error by Richardson
  extrapolation at fixed box half-width.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lagrange_mesh import Mesh, build_mesh
from .observables import mean_le
from .quench_dynamics import compute_overlaps
from .two_body import TwoBodyConfig, ground_state, initial_ground_state, solve


@dataclass(frozen=True)
class ConvergenceRow:
    n_points: int
    scaling: float
    ground_energy: float
    quenched_ground_energy: float
    mean_le: float | None
    d_ground: float | None = None
    d_quenched: float | None = None
    d_mean_le: float | None = None
    converged: bool | None = None


@dataclass(frozen=True)
class ConvergenceTable:
    g: float
    kappa: float
    tolerance: float
    rows: tuple[ConvergenceRow, ...]

    COLUMNS = ("n_points", "scaling", "ground_energy", "quenched_ground_energy", "mean_le",
               "d_ground", "d_quenched", "d_mean_le", "converged")

    @property
    def flagged(self) -> list[ConvergenceRow]:
        """Rows whose difference to the preceding ``N`` exceeds the tolerance."""
        return [r for r in self.rows if r.converged is False]

    def as_records(self) -> list[dict]:
        return [{c: getattr(r, c) for c in self.COLUMNS} for r in self.rows]


def _validated(values, name, kind):
    values = list(values)
    if not values:
        raise ValueError(f"{name} must not be empty")
    for v in values:
        if kind is int:
            if isinstance(v, bool) or int(v) != v or v < 3 or int(v) % 2 == 0:
                raise ValueError(f"{name} entries must be odd integers >= 3, got {v!r}")
        elif not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
            raise ValueError(f"{name} entries must be positive reals, got {v!r}")
    return [kind(v) for v in values]


def _point(mesh: Mesh, g: float, kappa: float, with_mean: bool):
    e0, psi = initial_ground_state(mesh, g)
    if with_mean:
        quenched = solve(TwoBodyConfig(mesh, g, kappa))
        result = compute_overlaps((e0, psi), quenched, threshold=None, trim=False)
        return e0, float(quenched.energies[0]), mean_le(result)
    e0p = float(ground_state(TwoBodyConfig(mesh, g, kappa)).energies[0])
    return e0, e0p, None


def convergence_report(g: float, kappa: float, n_list, h_list=None, *,
                       half_width: float | None = None, tolerance: float = 1e-4,
                       with_mean: bool = False) -> ConvergenceTable:
    """Tabulate ground energies (and optionally the mean echo) over meshes.

    Parameters
    ----------
    g, kappa : float
        Interaction and impurity strength.
    n_list : sequence of odd int
        Mesh sizes, in the order the differences are taken.
    h_list : sequence of float, optional
        Scalings; the table is the product ``h_list x n_list`` and
        differences run along ``n_list`` at fixed ``h`` (box convergence).
    half_width : float, optional
        Instead of ``h_list``: keep the box ``[-half_width, half_width]``
        fixed and set ``h = 2 half_width / (N - 1)`` (resolution convergence).
    tolerance : float
        A row is flagged when any difference to the previous ``N`` exceeds it.
    with_mean : bool
        Also compute the mean echo; needs a full diagonalization per row.
    """
    n_list = _validated(n_list, "n_list", int)
    if (h_list is None) == (half_width is None):
        raise ValueError("give exactly one of h_list or half_width")
    if h_list is not None:
        groups = [[(n, h) for n in n_list] for h in _validated(h_list, "h_list", float)]
    else:
        half_width = _validated([half_width], "half_width", float)[0]
        groups = [[(n, 2 * half_width / (n - 1)) for n in n_list]]

    rows = []
    for group in groups:
        prev = None
        for n, h in group:
            e0, e0p, lbar = _point(build_mesh(n, h), g, kappa, with_mean)
            if prev is None:
                rows.append(ConvergenceRow(n, h, e0, e0p, lbar))
            else:
                d = (e0 - prev[0], e0p - prev[1],
                     None if lbar is None else lbar - prev[2])
                ok = all(abs(x) <= tolerance for x in d if x is not None)
                rows.append(ConvergenceRow(n, h, e0, e0p, lbar, *d, converged=ok))
            prev = (e0, e0p, lbar)
    return ConvergenceTable(float(g), float(kappa), float(tolerance), tuple(rows))


@dataclass(frozen=True)
class Extrapolation:
    scalings: np.ndarray
    n_points: np.ndarray
    energies: np.ndarray
    estimate: float

    @property
    def correction(self) -> float:
        """Change of the estimate relative to the finest mesh."""
        return self.estimate - float(self.energies[np.argmin(self.scalings)])


def mesh_for_half_width(scaling: float, half_width: float) -> Mesh:
    """Odd mesh whose outermost nodes sit closest to ``+-half_width``."""
    m = max(1, int(round(half_width / scaling)))
    return build_mesh(2 * m + 1, scaling)


def extrapolate_energy(g: float, kappa: float = 0.0, scalings=(0.15, 0.1125),
                       half_width: float = 9.0) -> Extrapolation:
    """Ground energy extrapolated to ``h -> 0`` at fixed box size.

    With ``k`` scalings the energies are fitted exactly by
    ``E(h) = E* + c_1 h + ... + c_{k-1} h^{k-1}`` and ``E*`` is returned.
    """
    scalings = np.asarray(_validated(scalings, "scalings", float))
    if scalings.size < 2 or np.unique(scalings).size != scalings.size:
        raise ValueError("need at least two distinct scalings")
    energies, sizes = [], []
    for h in scalings:
        mesh = mesh_for_half_width(h, half_width)
        energies.append(float(ground_state(TwoBodyConfig(mesh, g, kappa)).energies[0]))
        sizes.append(mesh.n_points)
    energies = np.array(energies)
    vander = np.vander(scalings, scalings.size, increasing=True)
    coeffs = np.linalg.solve(vander, energies)
    return Extrapolation(scalings, np.array(sizes), energies, float(coeffs[0]))
