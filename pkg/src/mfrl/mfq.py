"""Tabular mean-field Q-learning on a simplex lattice.

Every episode sweeps all (grid point, action profile) pairs, queries the
simulator once per pair, projects the outcome back on the lattice and applies
a Q-learning update with the polynomial step size ``(1 + n)^-kappa``, where
``n`` counts earlier visits of the pair.  Updates within an episode read the
table as it stood at the start of the episode (Jacobi style); ``in_place=True``
switches to Gauss-Seidel reads for comparison.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .envs import MeanFieldEnv, env_step
from .simplex import SimplexGrid, enumerate_action_profiles

SWEEP_ORDERS = ("lexicographic", "shuffled")


def learning_rate(n, kappa: float):
    """Step size ``(1 + n)^-kappa`` after ``n`` earlier visits."""
    if not 0.5 < kappa < 1.0:
        warnings.warn(f"kappa={kappa} outside (1/2, 1); convergence guarantees do not apply", stacklevel=2)
    return (1.0 + np.asarray(n, dtype=float)) ** (-kappa)


@dataclass
class LearnedQTable:
    grid: SimplexGrid
    profiles: np.ndarray
    values: np.ndarray
    visit_counts: np.ndarray
    gamma: float
    kappa: float
    episode: int = 0
    # (episode, mean |TD error|, sup error vs reference or nan)
    history: list = field(default_factory=list)


def mfq_train(
    env: MeanFieldEnv,
    grid: SimplexGrid,
    gamma: float,
    kappa: float,
    n_episodes: int,
    sweep_order: str = "lexicographic",
    rng: np.random.Generator | None = None,
    *,
    profiles: np.ndarray | None = None,
    in_place: bool = False,
    reference: np.ndarray | None = None,
    table: LearnedQTable | None = None,
) -> LearnedQTable:
    """Run ``n_episodes`` full sweeps of mean-field Q-learning.

    Parameters
    ----------
    sweep_order
        ``"lexicographic"`` visits pairs grid-point-major in index order;
        ``"shuffled"`` draws a fresh permutation from ``rng`` every episode.
    reference
        optional exact table; when given, the sup-norm error after each
        episode is recorded in ``history``.
    table
        resume training from an existing table instead of ``Q = 0``.
    """
    if n_episodes < 1:
        raise ValueError("n_episodes must be at least 1")
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"discount must lie in [0, 1), got {gamma}")
    if sweep_order not in SWEEP_ORDERS:
        raise ValueError(f"sweep_order must be one of {SWEEP_ORDERS}")
    if rng is None:
        if sweep_order == "shuffled" or not env.deterministic:
            raise ValueError("a random generator is required for shuffled sweeps or a noisy environment")
    if table is None:
        if profiles is None:
            profiles = enumerate_action_profiles(env.n_states, env.n_actions)
        shape = (len(grid), len(profiles))
        table = LearnedQTable(grid, np.asarray(profiles), np.zeros(shape), np.zeros(shape, dtype=np.int64), gamma, kappa)
    profiles = table.profiles
    n_grid, n_prof = table.values.shape
    pairs = [(g, k) for g in range(n_grid) for k in range(n_prof)]
    points = grid.points
    learning_rate(0, kappa)  # warn once on a bad kappa

    q = table.values
    counts = table.visit_counts
    for _ in range(n_episodes):
        snapshot = q.copy()
        source = q if in_place else snapshot
        order = pairs if sweep_order == "lexicographic" else [pairs[i] for i in rng.permutation(len(pairs))]
        td_total = 0.0
        for g, k in order:
            res = env_step(env, points[g], profiles[k], rng)
            nxt = grid.project(res.next_state)
            alpha = (1.0 + counts[g, k]) ** (-kappa)
            td = res.reward + gamma * source[nxt].max() - source[g, k]
            q[g, k] = source[g, k] + alpha * td
            counts[g, k] += 1
            td_total += abs(td)
        table.episode += 1
        err = float(np.max(np.abs(q - reference))) if reference is not None else float("nan")
        table.history.append((table.episode, td_total / len(pairs), err))
    return table


def greedy_policy(table) -> np.ndarray:
    """Index of the best action profile at every grid point; ties go to the smallest index."""
    return np.argmax(table.values, axis=1)
