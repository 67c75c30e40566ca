"""
Lattices on the probability simplex
===================================

Tabular learning over distributions needs a finite set of distributions.  The
lattice of resolution ``n`` holds every vector with entries in ``{0, 1/n, ...,
1}`` that sums to one; any distribution is replaced by its nearest lattice
point.
"""

# %%
import numpy as np

from mfrl.simplex import distance, enumerate_action_profiles, enumerate_grid, grid_size, new_distribution

# %% The lattice of resolution 4 on two states has five points, in
# lexicographic order of their counts.
grid = enumerate_grid(2, 4)
print(grid.points)

# %% Sizes grow like a binomial coefficient.
for d, n in [(2, 8), (3, 10), (4, 10), (4, 20)]:
    print(f"{d} states, resolution {n}: {grid_size(d, n)} points")

# %% Projection picks the nearest point.  The worst-case distance shrinks like
# 1/n, which is what drives the discretization error of the tabular method.
rng = np.random.default_rng(0)
samples = rng.dirichlet(np.ones(3), size=2000)
for n in (2, 4, 8, 16):
    g = enumerate_grid(3, n)
    worst = max(distance(mu, g[i]) for mu, i in zip(samples, g.project_many(samples)))
    print(f"resolution {n:2d}: largest projection distance {worst:.4f} (bound {np.sqrt(3) / (2 * n):.4f})")

# %% Distributions are validated on construction.
print(new_distribution([2, 6], strict=False))

# %% An action profile assigns one action to each state; with 2 states and 2
# actions there are 4 profiles.
print(enumerate_action_profiles(2, 2))
