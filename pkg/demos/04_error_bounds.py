"""
Error bounds and grid refinement
================================

The convergence bound combines the learning accuracy with a term linear in the
lattice fineness.  The refinement study measures how the exact projected Q
table changes as the lattice is refined, and the Lipschitz probe estimates the
regularity constants that enter the bound.
"""

# %%
import numpy as np

from mfrl.analysis import (
    BoundInputs,
    corollary_bound,
    lipschitz_probe,
    nepi_order,
    optimal_tau,
    refinement_errors,
    theorem_error,
)
from mfrl.envs import LogisticEnv
from mfrl.simplex import enumerate_grid

env = LogisticEnv()

# %% Empirical Lipschitz constants (lower bounds) on a fine lattice.
l_phi, l_f = lipschitz_probe(env, enumerate_grid(2, 64), 200, np.random.default_rng(0))
print(f"L_Phi >= {l_phi:.3f}, L_f >= {l_f:.3f}")

# %% Plug them into the bound for a lattice of resolution 8.
inputs = BoundInputs(eps=0.01, gamma=0.5, L_V=1.0, L_Phi=l_phi, L_f=l_f, eps_S=np.sqrt(2) / 16,
                     T_cov=36, kappa=0.7, delta=0.1, V_max=4.0, K_A=0.05, n_grid=9, n_profiles=4)
eps_prime = theorem_error(inputs)
print("error bound:", eps_prime)
print("episode order (unit constant):", f"{nepi_order(inputs):.3e}")
tau, best = optimal_tau(eps_prime, 4, inputs.K_A)
print(f"softmax bound at tau=10: {corollary_bound(10.0, eps_prime, 4, inputs.K_A):.3f}; best tau {tau:.3g} gives {best:.3f}")

# %% Refinement: errors against the resolution-16 table shrink as the lattice doubles.
res = refinement_errors(env, (2, 4, 8), 0.5, reference_resolution=16)
for n, e in zip(res.resolutions, res.errors):
    print(f"resolution {n:2d}: sup error {e:.4f}")
print("ratios:", np.round(res.ratios, 2))
