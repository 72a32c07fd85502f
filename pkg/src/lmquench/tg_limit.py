"""Tonks-Girardeau pair via the Fermi-Bose mapping.

Two hard-core bosons have the same echo as two free fermions filling the two
lowest oscillator levels. A central delta leaves the odd level untouched, so
the Slater-determinant echo collapses to the ground-orbital survival
amplitude. Both forms are computed here from single-particle mesh spectra.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quench_dynamics import EchoSeries, _phase_sum
from .lagrange_mesh import Mesh, SingleParticleSpectrum, single_particle_spectrum


@dataclass(frozen=True)
class TGQuench:
    single_overlaps: np.ndarray
    single_energies: np.ndarray
    ground_energy: float
    free: SingleParticleSpectrum
    quenched: SingleParticleSpectrum

    @property
    def weights(self) -> np.ndarray:
        return np.abs(self.single_overlaps) ** 2


def tg_quench(mesh: Mesh, kappa: float) -> TGQuench:
    """Overlaps of the quenched single-particle levels with the trap ground orbital."""
    free = single_particle_spectrum(mesh, 0.0)
    quenched = single_particle_spectrum(mesh, kappa)
    overlaps = quenched.vectors.T @ free.vectors[:, 0]
    return TGQuench(overlaps, quenched.energies, float(free.energies[0]), free, quenched)


def tg_echo(mesh: Mesh, kappa: float, times) -> EchoSeries:
    q = tg_quench(mesh, kappa)
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        raise ValueError("empty time grid")
    nu = _phase_sum(q.ground_energy - q.single_energies, q.weights.astype(complex), times)
    return EchoSeries(times, nu)


def overlap_matrix(mesh: Mesh, kappa: float, times) -> np.ndarray:
    """``A[t, m, n] = <phi'_n(t) | phi_m(t)>`` for the two lowest orbitals.

    ``phi_m(t)`` evolves oscillator orbital ``m`` in the bare trap,
    ``phi'_n(t)`` evolves oscillator orbital ``n`` with the impurity switched on.
    """
    q = tg_quench(mesh, kappa)
    times = np.asarray(times, dtype=float)
    # oscillator orbitals in the quenched eigenbasis
    proj = q.quenched.vectors.T @ q.free.vectors[:, :2]
    eps = q.free.energies[:2]
    out = np.empty((times.size, 2, 2), dtype=complex)
    for m in range(2):
        for n in range(2):
            amp = proj[:, n] * proj[:, m]
            out[:, m, n] = _phase_sum(q.single_energies - eps[m], amp.astype(complex), times)
    return out


def tg_determinant_echo(mesh: Mesh, kappa: float, times) -> EchoSeries:
    """Echo of the two-fermion Slater determinant, ``|det A(t)|^2``."""
    a = overlap_matrix(mesh, kappa, times)
    det = a[:, 0, 0] * a[:, 1, 1] - a[:, 0, 1] * a[:, 1, 0]
    # det is the conjugate of the compact-form amplitude
    return EchoSeries(np.asarray(times, dtype=float), np.conj(det))
