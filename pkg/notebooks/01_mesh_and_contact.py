# %% [markdown]
# # Two atoms in a trap on a Lagrange mesh
#
# The pair lives on a product sinc mesh. The contact interaction and the
# central impurity act only at the origin node, so the two-body Hamiltonian
# is sparse and the ground state is cheap. This script checks the harmonic
# limit, follows the ground energy as the contact strength grows, and shows
# the first-order mesh error of the delta and its removal by extrapolation.
#
# Run with ``python notebooks/01_mesh_and_contact.py``.

# %%
import numpy as np

from lmquench.convergence import extrapolate_energy
from lmquench.lagrange_mesh import build_mesh, single_particle_spectrum
from lmquench.two_body import TwoBodyConfig, ground_state, initial_ground_state

mesh = build_mesh(121, 0.15)
print(f"mesh: N={mesh.n_points}, h={mesh.scaling}, nodes in [{mesh.nodes[0]:.2f}, {mesh.nodes[-1]:.2f}]")

# %% [markdown]
# ## Harmonic limit
# One particle: levels n + 1/2. Two free bosons: 1, 2, 3, ...

# %%
sp = single_particle_spectrum(mesh, 0.0)
print("single particle:", np.round(sp.energies[:5], 10))
e0, _ = initial_ground_state(mesh, 0.0)
e1 = ground_state(TwoBodyConfig(mesh, 0.0, 0.0), parity=-1).energies[0]
print(f"pair: E0={e0:.10f}  lowest odd-parity level={e1:.10f}")

# %% [markdown]
# ## Ground energy versus g
# Repulsion pushes E0 from 1 towards the hard-core value 2, slowly (~1/g).

# %%
for g in (0.0, 0.5, 1.0, 2.5, 5.0, 10.0, 25.0):
    e, _ = initial_ground_state(mesh, g)
    print(f"g={g:5.1f}  E0={e:.6f}")

# %% [markdown]
# ## Mesh error of the contact term
# The delta is represented on one node with weight 1/h; the cusp of the
# wavefunction is not resolved and the error is linear in h. Two meshes
# at fixed box size remove the leading term.

# %%
for g in (1.0, 2.5, 10.0):
    ex = extrapolate_energy(g)
    print(f"g={g:4.1f}  E(h)={np.round(ex.energies, 6)} at h={ex.scalings}  -> {ex.estimate:.6f}")
