"""
Exact dynamic programming and mean-field Q-learning
===================================================

On a lattice the lifted control problem is a finite MDP, so value iteration
gives the exact projected Q table.  Mean-field Q-learning sweeps every
(lattice point, action profile) pair each episode and should converge to it.
"""

# %%
import numpy as np

from mfrl.analysis import empirical_corollary_check
from mfrl.dp import exact_q, projected_mdp, value_iteration
from mfrl.envs import LogisticEnv
from mfrl.mfq import greedy_policy, mfq_train
from mfrl.simplex import enumerate_grid

env = LogisticEnv()
grid = enumerate_grid(2, 8)
mdp = projected_mdp(env, grid)
gamma = 0.5

# %% Exact tables.  The state values are the row maxima of Q.
q = exact_q(mdp, gamma=gamma, tol=1e-10)
v = value_iteration(mdp, gamma=gamma, tol=1e-10)
print("sweeps:", q.sweeps, "max |max_a Q - V|:", np.max(np.abs(q.state_values() - v.values)))

# %% Learning with step size (1 + n)^-0.7, tracking the error against the oracle.
learned = mfq_train(env, grid, gamma, 0.7, 2000, reference=q.values)
for episode, td, err in learned.history[:: len(learned.history) // 8]:
    print(f"episode {episode:5d}: mean |TD| {td:.2e}, sup error {err:.2e}")
print("greedy policies agree:", np.array_equal(greedy_policy(learned), q.greedy()))

# %% Softmax selection from the learned table versus the exact argmax set.
for tau in (1.0, 10.0, 100.0):
    rep = empirical_corollary_check(learned, q, tau)
    print(f"tau={tau:5g}: distance {rep.lhs_max:.4f} <= bound {rep.bound:.4f}: {rep.passed}")
