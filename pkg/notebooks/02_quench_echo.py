# %% [markdown]
# # Impurity quench: echo, its distribution and the spectral function
#
# The interacting ground state is suddenly exposed to a central delta of
# strength kappa. All observables follow from the overlaps a_n with the
# quenched eigenstates. Default parameters sit on the beating resonance
# (g=2.5, kappa=0.7), where two excited states carry almost equal weight.
#
# A full-size point (N=121) takes ~15 s; set SMALL = True for a quick look.

# %%
import math

import numpy as np

from lmquench.lagrange_mesh import build_mesh
from lmquench.observables import (classify_distribution, le_histogram, mean_le,
                                  spectral_function_discrete)
from lmquench.pipeline import quench_point
from lmquench.quench_dynamics import default_time_grid, echo_amplitude

SMALL = False
G, KAPPA = 2.5, 0.7
mesh = build_mesh(41, 0.35) if SMALL else build_mesh(121, 0.15)
result, _ = quench_point(mesh, G, KAPPA)
print(f"E0={result.initial_energy:.6f}  E'0={result.final_energies[0]:.6f}  "
      f"kept {result.n_states} states, sum rule {result.sum_rule:.8f}")

# %% [markdown]
# ## Leading overlaps

# %%
for n in range(5):
    print(f"n={n}  E'={result.final_energies[n]:8.4f}  |a|^2={result.weights[n]:.5f}")

# %% [markdown]
# ## Echo
# Short times show the revival near t = pi; the long horizon gives the
# distribution of echo values, whose mean is the sum of |a_n|^4.

# %%
short = echo_amplitude(result, np.linspace(0, 2 * math.pi, 13))
for t, value in zip(short.times, short.echo):
    print(f"t={t:5.2f}  L={value:.4f}")

series = echo_amplitude(result, default_time_grid(result, max_samples=2 ** 20))
print(f"time average {series.echo.mean():.5f}  vs  sum |a|^4 = {mean_le(result):.5f}")

# %%
hist = le_histogram(series, bins=40, lower="min")
label = classify_distribution(le_histogram(series, lower="min"))
print(f"distribution: {label.label} (confidence {label.confidence:.2f})")
scale = 60 / hist.density.max()
for y, p in zip(hist.centers, hist.density):
    print(f"{y:6.3f} {'#' * int(round(p * scale))}")

# %% [markdown]
# ## Spectral function
# Lines at omega = E'_n - E0 with weight 2 pi |a_n|^2. A repulsive impurity
# puts every line at positive omega.

# %%
spec = spectral_function_discrete(result)
order = np.argsort(spec.peak_weights)[::-1][:6]
for i in sorted(order, key=lambda i: spec.peak_frequencies[i]):
    print(f"omega={spec.peak_frequencies[i]:8.4f}  weight={spec.peak_weights[i]:.4f}")
