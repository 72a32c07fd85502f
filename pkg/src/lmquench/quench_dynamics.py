"""Post-quench dynamics built from overlaps with the quenched eigenbasis.

Everything downstream of the eigensolve factors through the overlap weights
``|a_n|^2``, the initial energy ``E0`` and the quenched energies ``E'_n``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .lagrange_mesh import Mesh, interpolate
from .two_body import Spectrum

DEFAULT_SUM_RULE = 1 - 1e-6
DEFAULT_HORIZON = 2 * math.pi * 1600


class SumRuleError(ValueError):
    pass


@dataclass(frozen=True)
class QuenchResult:
    overlaps: np.ndarray
    initial_energy: float
    final_energies: np.ndarray
    sum_rule: float
    mesh: Mesh | None = None
    g: float | None = None
    kappa: float | None = None

    def __post_init__(self):
        a = np.asarray(self.overlaps, dtype=complex)
        e = np.asarray(self.final_energies, dtype=float)
        if a.shape != e.shape:
            raise ValueError(f"{a.size} overlaps for {e.size} energies")
        if not np.isfinite(a).all():
            raise ValueError("non-finite overlaps")
        if self.sum_rule > 1 + 1e-12:
            raise ValueError(f"sum rule exceeds one: {self.sum_rule!r}")
        object.__setattr__(self, "overlaps", a)
        object.__setattr__(self, "final_energies", e)

    @property
    def weights(self) -> np.ndarray:
        """``|a_n|^2``."""
        return np.abs(self.overlaps) ** 2

    @property
    def n_states(self) -> int:
        return self.final_energies.size

    @property
    def detunings(self) -> np.ndarray:
        """``E0 - E'_n``, the phase rates of the echo amplitude."""
        return self.initial_energy - self.final_energies


@dataclass(frozen=True)
class EchoSeries:
    times: np.ndarray
    amplitude: np.ndarray
    echo: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "echo", np.abs(self.amplitude) ** 2)

    @property
    def horizon(self) -> float:
        return float(self.times[-1] - self.times[0])

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if self.times.size > 1 else 0.0


@dataclass(frozen=True)
class DensityField:
    positions: np.ndarray
    times: np.ndarray
    values: np.ndarray  # shape (len(times), len(positions))


def _state_vector(state, basis_of: Spectrum) -> np.ndarray:
    if isinstance(state, Spectrum):
        if state.basis is not basis_of.basis and (
                state.basis is None or basis_of.basis is None
                or state.basis.parity != basis_of.basis.parity):
            return basis_of.basis.from_grid(state.state_grid(0))
        return state.vectors[:, 0]
    state = np.asarray(state)
    if state.ndim == 2:
        return basis_of.basis.from_grid(state)
    return state


def compute_overlaps(initial, quenched: Spectrum,
                     threshold: float | None = DEFAULT_SUM_RULE,
                     trim: bool = True) -> QuenchResult:
    """Overlaps ``a_n = <phi_n | psi_0>`` of the initial state with quenched states.

    Parameters
    ----------
    initial : tuple
        ``(E0, psi0)`` where ``psi0`` is a :class:`Spectrum` (state 0 used),
        an ``N x N`` grid, or reduced coordinates in ``quenched.basis``.
    quenched : Spectrum
        Quenched eigenpairs, ascending.
    threshold : float or None
        Required ``sum |a_n|^2``. ``None`` disables the check.
    trim : bool
        Keep only the lowest states needed to reach ``threshold``.
    """
    e0, psi0 = initial
    if isinstance(psi0, Spectrum) and psi0.config is not None and quenched.config is not None:
        if psi0.config.mesh != quenched.config.mesh:
            raise ValueError(
                f"mesh mismatch: initial {psi0.config.mesh.key()} vs "
                f"quenched {quenched.config.mesh.key()}")
    v0 = _state_vector(psi0, quenched)
    if v0.shape[0] != quenched.vectors.shape[0]:
        raise ValueError(
            f"initial state has {v0.shape[0]} components, quenched basis "
            f"{quenched.vectors.shape[0]}")
    a = quenched.vectors.T @ v0
    w = np.abs(a) ** 2
    total = float(w.sum())
    if threshold is not None:
        if total < threshold:
            raise SumRuleError(
                f"sum of overlap weights {total:.9f} below {threshold}; "
                "retain more eigenstates or enlarge the mesh")
        if trim:
            k = int(np.searchsorted(np.cumsum(w), threshold) + 1)
            k = min(k, a.size)
            a = a[:k]
            total = float(np.sum(w[:k]))
    energies = quenched.energies[: a.size]
    cfg = quenched.config
    return QuenchResult(a.astype(complex), float(e0), energies.copy(), min(total, 1.0),
                        None if cfg is None else cfg.mesh,
                        None if cfg is None else cfg.g,
                        None if cfg is None else cfg.kappa)


def default_time_grid(result: QuenchResult, horizon: float = DEFAULT_HORIZON,
                      samples_per_period: int = 20,
                      max_samples: int | None = None,
                      rel_weight: float | None = None) -> np.ndarray:
    """Uniform grid from 0 to ``horizon`` resolving the fastest retained detuning.

    The step is ``2 pi / (samples_per_period * max |E0 - E'_n|)``. With
    ``rel_weight`` only lines heavier than ``rel_weight`` times the heaviest
    set the fastest frequency. If ``max_samples`` is given and the rule needs
    more points, the step is enlarged to fit; the grid then undersamples the
    fastest components.
    """
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    rates = np.abs(result.detunings)
    if rel_weight is not None and rates.size:
        w = result.weights
        rates = rates[w > rel_weight * w.max()]
    spread = float(rates.max()) if rates.size else 0.0
    if spread <= 0:
        dt = horizon / 1000
    else:
        dt = 2 * math.pi / (samples_per_period * spread)
    n = int(math.ceil(horizon / dt)) + 1
    if max_samples is not None and n > max_samples:
        n = max_samples
    return np.linspace(0.0, horizon, n)


def _phase_sum(rates: np.ndarray, weights: np.ndarray, times: np.ndarray,
               block: int = 512) -> np.ndarray:
    """``sum_n weights_n * exp(1j * rates_n * t)`` for every ``t``."""
    out = np.empty(times.size, dtype=complex)
    uniform = False
    if times.size > 2 * block:
        dt = (times[-1] - times[0]) / (times.size - 1)
        ideal = times[0] + np.arange(times.size) * dt
        uniform = np.allclose(times, ideal, rtol=0, atol=1e-9 * max(1.0, abs(times[-1])))
    if not uniform:
        for s in range(0, times.size, 4096):
            t = times[s:s + 4096]
            out[s:s + 4096] = np.exp(1j * np.outer(t, rates)) @ weights
        return out
    # exp(i r (t0 + j dt)) = exp(i r t0) * exp(i r j dt): one phase table, one GEMM
    table = np.exp(1j * np.outer(np.arange(block) * dt, rates))
    starts = times[0] + np.arange(0, times.size, block) * dt
    coeff = np.exp(1j * np.outer(rates, starts)) * weights[:, None]
    full = table @ coeff
    return full.T.reshape(-1)[: times.size]


def echo_amplitude(result: QuenchResult, times) -> EchoSeries:
    """Echo amplitude ``nu(t) = sum_n |a_n|^2 exp(i (E0 - E'_n) t)`` and ``|nu|^2``."""
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        raise ValueError("empty time grid")
    nu = _phase_sum(result.detunings, result.weights.astype(complex), times)
    return EchoSeries(times, nu)


def evolve_state(result: QuenchResult, quenched: Spectrum, t: float,
                 grid: bool = True) -> np.ndarray:
    """``Psi(t) = sum_n a_n phi_n exp(-i E'_n t)``.

    Returns the complex ``N x N`` grid, or reduced coordinates if ``grid`` is
    False.
    """
    k = result.n_states
    coeff = result.overlaps * np.exp(-1j * result.final_energies * t)
    vec = quenched.vectors[:, :k] @ coeff
    if not grid:
        return vec
    return quenched.basis.to_grid(vec.real) + 1j * quenched.basis.to_grid(vec.imag)


def single_particle_density(state: np.ndarray, mesh: Mesh, refine: int | None = None):
    """One-body density from an ``N x N`` coefficient grid.

    At the nodes ``rho(x_i) = sum_j |Psi_ij|^2 / h``. With ``refine`` the
    density is evaluated on a grid ``refine`` times finer by Fourier
    interpolation along the first coordinate. Returns ``(positions, rho)``.
    """
    state = np.asarray(state)
    h = mesh.scaling
    if refine is None or refine == 1:
        return mesh.nodes.copy(), np.sum(np.abs(state) ** 2, axis=1) / h
    n = mesh.n_points
    m = (n - 1) * refine + 1
    x = np.linspace(mesh.nodes[0], mesh.nodes[-1], m)
    # psi(x, x_j) for every second-coordinate node j, then quadrature over j
    values = interpolate(mesh, state, x)  # (m, N), already carries 1/sqrt(h)
    return x, np.sum(np.abs(values) ** 2, axis=1)


def density_evolution(result: QuenchResult, quenched: Spectrum, times,
                      refine: int | None = None) -> DensityField:
    times = np.asarray(times, dtype=float)
    rows = []
    x = None
    for t in times:
        x, rho = single_particle_density(evolve_state(result, quenched, t),
                                         quenched.basis.mesh, refine)
        rows.append(rho)
    return DensityField(x, times, np.array(rows))


def horizon_warning(series: EchoSeries, minimum: float = DEFAULT_HORIZON) -> bool:
    short = series.horizon < minimum * (1 - 1e-12)
    if short:
        warnings.warn(
            f"echo horizon {series.horizon:.1f} shorter than {minimum:.1f}; "
            "long-time statistics may not have converged", RuntimeWarning, stacklevel=3)
    return short
