"""Exact dynamic programming on the projected problem.

Once the simplex is replaced by a lattice and every transition is followed by
a nearest-point projection, the lifted problem is an ordinary finite MDP with
``|grid|`` states and ``|A|^|S|`` actions.  :func:`projected_mdp` tabulates it
once; the Bellman operators and both fixed-point iterations then work on
index arrays.  The common noise enters through a fixed quadrature panel so
the fixed points are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .envs import MeanFieldEnv, NoisePanel
from .errors import IterationCap
from .simplex import SimplexGrid, enumerate_action_profiles

DEFAULT_MAX_SWEEPS = 10**6


@dataclass(frozen=True, eq=False)
class ProjectedMDP:
    """Tabulated projected dynamics.

    ``next_index[g, k, e]`` is the grid index reached from grid point ``g``
    under action profile ``k`` and noise node ``e``; ``rewards[g, k]`` is the
    lifted reward there.
    """

    grid: SimplexGrid
    profiles: np.ndarray
    panel: NoisePanel
    next_index: np.ndarray
    rewards: np.ndarray

    @property
    def reward_bound(self) -> float:
        return float(np.max(np.abs(self.rewards)))

    def expected(self, v: np.ndarray) -> np.ndarray:
        """``E v(next)`` for every (grid point, profile) pair."""
        return v[self.next_index] @ self.panel.weights


def projected_mdp(
    env: MeanFieldEnv,
    grid: SimplexGrid,
    panel: NoisePanel | None = None,
    profiles: np.ndarray | None = None,
) -> ProjectedMDP:
    if panel is None:
        panel = env.noise_panel()
    if profiles is None:
        profiles = enumerate_action_profiles(env.n_states, env.n_actions)
    n, m, e = len(grid), len(profiles), len(panel)
    nxt = np.empty((n, m, e), dtype=np.int64)
    rew = np.empty((n, m))
    for g in range(n):
        mu = grid[g]
        for k in range(m):
            rew[g, k] = env.reward(mu, profiles[k])
            states = [env.step(mu, profiles[k], noise).next_state for noise in panel.values]
            nxt[g, k] = grid.project_many(np.array(states))
    return ProjectedMDP(grid, np.asarray(profiles), panel, nxt, rew)


@dataclass
class ValueTable:
    grid: SimplexGrid
    values: np.ndarray
    sweeps: int = 0
    residual: float = float("nan")


@dataclass
class ExactQTable:
    grid: SimplexGrid
    profiles: np.ndarray
    values: np.ndarray
    sweeps: int = 0
    residual: float = float("nan")

    def state_values(self) -> np.ndarray:
        return self.values.max(axis=1)

    def greedy(self) -> np.ndarray:
        return np.argmax(self.values, axis=1)


def _as_mdp(env_or_mdp, grid, panel, profiles) -> ProjectedMDP:
    if isinstance(env_or_mdp, ProjectedMDP):
        return env_or_mdp
    return projected_mdp(env_or_mdp, grid, panel, profiles)


def _check_gamma(gamma: float, allow_zero: bool = True) -> None:
    if not (0.0 <= gamma < 1.0) or (gamma == 0.0 and not allow_zero):
        raise ValueError(f"discount must lie in [0, 1), got {gamma}")


def bellman_T_a(v, policy, env, gamma, panel=None, *, grid=None, profiles=None) -> np.ndarray:
    """Apply the policy operator ``T_a`` to ``v``.

    ``policy[g]`` is the index of the action profile used at grid point ``g``;
    ``env`` may be an environment (then ``grid`` is required) or a
    :class:`ProjectedMDP`.
    """
    _check_gamma(gamma)
    mdp = _as_mdp(env, grid, panel, profiles)
    v = np.asarray(v.values if isinstance(v, ValueTable) else v, dtype=float)
    policy = np.asarray(policy, dtype=int)
    rows = np.arange(len(mdp.grid))
    q = mdp.rewards + gamma * mdp.expected(v)
    return q[rows, policy]


def bellman_T(v, env, gamma, panel=None, *, grid=None, profiles=None) -> np.ndarray:
    """Apply the optimality operator ``T`` (max of ``T_a`` over all profiles)."""
    _check_gamma(gamma)
    mdp = _as_mdp(env, grid, panel, profiles)
    v = np.asarray(v.values if isinstance(v, ValueTable) else v, dtype=float)
    return (mdp.rewards + gamma * mdp.expected(v)).max(axis=1)


def _stop_threshold(tol: float, gamma: float) -> float:
    if tol <= 0:
        raise ValueError("tol must be positive")
    # successive-iterate gap that certifies ||v - v*|| <= tol / 2
    return np.inf if gamma == 0 else tol * (1 - gamma) / (2 * gamma)


def value_iteration(
    env,
    grid: SimplexGrid | None = None,
    gamma: float = 0.9,
    panel: NoisePanel | None = None,
    tol: float = 1e-8,
    *,
    profiles=None,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
) -> ValueTable:
    """Iterate ``T`` from ``v = 0`` until the sup-norm step falls below ``tol (1 - gamma) / (2 gamma)``."""
    _check_gamma(gamma)
    mdp = _as_mdp(env, grid, panel, profiles)
    threshold = _stop_threshold(tol, gamma)
    v = np.zeros(len(mdp.grid))
    for sweep in range(1, max_sweeps + 1):
        new = (mdp.rewards + gamma * mdp.expected(v)).max(axis=1)
        gap = float(np.max(np.abs(new - v)))
        v = new
        if gap <= threshold:
            return ValueTable(mdp.grid, v, sweep, gap)
    raise IterationCap(f"value iteration did not converge in {max_sweeps} sweeps (last gap {gap:.3g})")


def exact_q(
    env,
    grid: SimplexGrid | None = None,
    gamma: float = 0.9,
    panel: NoisePanel | None = None,
    tol: float = 1e-8,
    *,
    profiles=None,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
) -> ExactQTable:
    """Fixed point of ``Q(g, k) = r(g, k) + gamma E max_k' Q(next, k')``, same stopping rule as value iteration."""
    _check_gamma(gamma)
    mdp = _as_mdp(env, grid, panel, profiles)
    threshold = _stop_threshold(tol, gamma)
    q = np.zeros_like(mdp.rewards)
    for sweep in range(1, max_sweeps + 1):
        new = mdp.rewards + gamma * mdp.expected(q.max(axis=1))
        gap = float(np.max(np.abs(new - q)))
        q = new
        if gap <= threshold:
            return ExactQTable(mdp.grid, mdp.profiles, q, sweep, gap)
    raise IterationCap(f"Q iteration did not converge in {max_sweeps} sweeps (last gap {gap:.3g})")


@dataclass(frozen=True)
class PolicyEvaluation:
    mean: float
    std: float
    truncation_bound: float
    n_rollouts: int


def grid_policy(grid: SimplexGrid, profiles: np.ndarray, policy: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    """Turn a per-grid-point profile assignment into a feedback map ``mu -> action profile``."""
    profiles = np.asarray(profiles)
    policy = np.asarray(policy, dtype=int)
    return lambda mu: profiles[policy[grid.project(mu)]]


def evaluate_policy(
    env: MeanFieldEnv,
    policy: Callable[[np.ndarray], np.ndarray],
    mu0,
    gamma: float,
    horizon: int,
    n_noise_rollouts: int = 1,
    rng: np.random.Generator | None = None,
    *,
    grid: SimplexGrid | None = None,
    reward_bound: float | None = None,
) -> PolicyEvaluation:
    """Monte-Carlo estimate of the truncated discounted return of a feedback policy.

    The dynamics are the exact ones unless ``grid`` is given, in which case
    every state is projected on the lattice (the projected problem).
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    _check_gamma(gamma)
    n = 1 if env.deterministic else n_noise_rollouts
    if not env.deterministic and rng is None:
        raise ValueError("a random generator is required when the common noise is enabled")
    returns = np.empty(n)
    for r in range(n):
        mu = np.asarray(mu0, dtype=float)
        if grid is not None:
            mu = grid[grid.project(mu)]
        total, disc = 0.0, 1.0
        for _ in range(horizon):
            action = policy(mu)
            noise = env.sample_noise(rng) if not env.deterministic else env.neutral_noise
            res = env.step(mu, action, noise)
            total += disc * res.reward
            disc *= gamma
            mu = res.next_state
            if grid is not None:
                mu = grid[grid.project(mu)]
        returns[r] = total
    c_f = env.reward_bound() if reward_bound is None else reward_bound
    bound = gamma**horizon * c_f / (1 - gamma) if np.isfinite(c_f) else np.inf
    return PolicyEvaluation(float(returns.mean()), float(returns.std()), float(bound), n)
