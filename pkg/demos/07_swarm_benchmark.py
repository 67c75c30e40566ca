"""
The swarm benchmark
===================

The swarm model has a closed-form stationary control a*(x) = 2 pi cos(2 pi x)
and density proportional to exp(2 sin 2 pi x).  This script checks the
discrete scheme against them and then trains a short DDPG run, reporting the
distance of the learned control from a*.
"""

# %%
import numpy as np

from mfrl.acceptance import swarm_reward_comparison
from mfrl.analysis import stationarity_residual, swarm_metrics
from mfrl.ddpg import DdpgConfig, actor_policy, ddpg_train
from mfrl.envs import SwarmEnv, SwarmParams, swarm_optimal_control
from mfrl.io import derive_rng

# %% The scheme is first order: the one-step residual at the closed-form
# solution halves when the grid is refined.
for n in (32, 64, 128, 256):
    p = SwarmParams(n_points=n)
    print(f"N_p={n:3d}: residual / dt = {stationarity_residual(p) / p.dt:.4f}")

# %% Metrics of the closed-form control itself.
p = SwarmParams(n_points=128)
a_star = swarm_optimal_control(p)
print(swarm_metrics(lambda M: a_star, p, np.random.default_rng(0)))

# %% A short DDPG run (the acceptance suite uses 3000 episodes).
p = SwarmParams(n_points=32, dt=0.05)
env = SwarmEnv(p)
config = DdpgConfig(n_episodes=100, episode_length=40, gamma=0.95, hidden=(64, 64), reward_scale=0.1,
                    buffer_reset_per_episode=False, updates_per_step=4)
actor, critic, log = ddpg_train(env, config, derive_rng(0, "ddpg"))
learned, reference = swarm_reward_comparison(env, actor)
print(f"average reward from the stationary density: learned {learned:.3f}, closed form {reference:.3f}")
print("control error:", swarm_metrics(actor_policy(env, actor), p, np.random.default_rng(1)).control_error)
