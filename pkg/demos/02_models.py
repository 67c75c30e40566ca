"""
The two benchmark models
========================

The cyber-security model moves computers between four states (defended or
undefended, infected or susceptible).  The swarm model moves a density on the
circle with a velocity field and diffusion.  Both are advanced one time step
at a time from a distribution and a control.
"""

# %%
import numpy as np

from mfrl.envs import (
    CyberEnv,
    SwarmEnv,
    SwarmParams,
    cyber_generator,
    periodic_gaussian,
    swarm_optimal_control,
    swarm_stationary_density,
)

# %% Cyber model: the rate matrix has zero column sums, so an Euler step keeps
# the total mass.
env = CyberEnv()
mu = np.array([0.25, 0.25, 0.25, 0.25])
G = cyber_generator(mu, np.array([1.0, 1.0, 0.0, 0.0]), 1.0, env.params)
print(np.round(G, 3))
print("column sums:", G.sum(axis=0))

# %% Ten time units of the "always defend" control from three starts.
for start in ([0.25, 0.25, 0.25, 0.25], [1, 0, 0, 0], [0, 0, 0, 1]):
    m = np.array(start, dtype=float)
    for _ in range(int(10 / env.params.dt)):
        m = env.step(m, np.ones(4)).next_state
    print(start, "->", np.round(m, 4), "reward", round(env.reward(m, np.ones(4)), 4))

# %% Swarm model: under the closed-form control, any start relaxes towards
# the closed-form stationary density.
p = SwarmParams(n_points=64)
swarm = SwarmEnv(p)
a_star, m_star = swarm_optimal_control(p), swarm_stationary_density(p)
M = periodic_gaussian(p, 0.7, 0.05)
for step in range(501):
    if step % 100 == 0:
        err = np.sqrt(p.h * np.sum((M - m_star) ** 2))
        print(f"step {step:3d}: L2 distance to the stationary density {err:.4f}")
    M = swarm.step(M, a_star).next_state
