"""
DDPG on the cyber-security model
================================

The actor maps the four-state distribution to four defense intensities.  After
training, the learned feedback control is replayed from three different
starting distributions; they should all settle on the same distribution.
"""

# %%
import numpy as np

from mfrl.acceptance import cyber_trajectories
from mfrl.ddpg import DdpgConfig, actor_policy, ddpg_train
from mfrl.envs import CyberEnv
from mfrl.io import derive_rng

env = CyberEnv()
config = DdpgConfig(n_episodes=150, episode_length=50, gamma=0.95, hidden=(64, 64))
actor, critic, log = ddpg_train(env, config, derive_rng(0, "ddpg"))
returns = log.returns
print("mean training return, first and last 25 episodes:", returns[:25].mean(), returns[-25:].mean())

# %% Replay the learned control for 10 time units.
trajs, n = cyber_trajectories(env, actor)
for traj in trajs:
    print(np.round(traj[0], 3), "->", np.round(traj[n], 4))

# %% The control the actor applies at the end point.
print("control at the end point:", np.round(actor_policy(env, actor)(trajs[0][n]), 3))
