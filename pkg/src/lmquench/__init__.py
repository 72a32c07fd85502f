"""Two bosons in a harmonic trap, quenched by a central delta impurity.

The pair is discretized on a Lagrange (sinc) mesh; the overlaps of the
interacting ground state with the post-quench eigenstates drive every
observable: Loschmidt echo, its long-time distribution, the spectral
function and the one-body density.
"""

import sys

__version__ = "0.1.0"

from .lagrange_mesh import (Mesh, PhysicalCouplings, SymmetricOperator, build_mesh,
                            g1d_from_scattering, interpolate, kinetic_matrix,
                            potential_diagonal, single_particle_hamiltonian,
                            single_particle_spectrum)
from .two_body import (EigensolverError, Spectrum, TwoBodyConfig, assemble_two_body,
                       eigensolve, ground_state, initial_ground_state, pair_basis, solve)
from .quench_dynamics import (DensityField, EchoSeries, QuenchResult, SumRuleError,
                              compute_overlaps, default_time_grid, density_evolution,
                              echo_amplitude, evolve_state, single_particle_density)
from .observables import (Classification, ClassifierThresholds, EchoHistogram,
                          SpectralFunction, TailFit, classify_distribution, fit_spectral_tail,
                          le_histogram, mean_le, spectral_function_discrete,
                          spectral_function_fft)
from .tg_limit import TGQuench, tg_determinant_echo, tg_echo, tg_quench
from .convergence import convergence_report, extrapolate_energy

__all__ = [name for name, obj in list(globals().items())
           if not name.startswith("_") and not isinstance(obj, type(sys))]
