import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfrl.acceptance import brute_force_values
from mfrl.dp import (
    ProjectedMDP,
    bellman_T,
    bellman_T_a,
    evaluate_policy,
    exact_q,
    grid_policy,
    projected_mdp,
    value_iteration,
)
from mfrl.envs import CyberEnv, CyberParams, LogisticEnv, LogisticParams
from mfrl.errors import IterationCap
from mfrl.simplex import enumerate_grid

ENV = LogisticEnv()
GRID = enumerate_grid(2, 4)
MDP = projected_mdp(ENV, GRID)


def constant_env(c):
    return LogisticEnv(LogisticParams(bonus=(c, c), action_cost=(0.0, 0.0), crowd_cost=0.0))


def test_T_a_with_zero_value_is_reward():
    policy = np.arange(len(GRID)) % len(MDP.profiles)
    out = bellman_T_a(np.zeros(len(GRID)), policy, MDP, 0.9)
    np.testing.assert_allclose(out, MDP.rewards[np.arange(len(GRID)), policy])
    v = np.random.default_rng(0).standard_normal(len(GRID))
    np.testing.assert_allclose(bellman_T_a(v, policy, MDP, 0.0), out)


def test_T_a_twice_matches_two_step_rollout():
    gamma = 0.8
    policy = np.array([0, 3, 1, 2, 3])
    v2 = bellman_T_a(bellman_T_a(np.zeros(len(GRID)), policy, ENV, gamma, grid=GRID), policy, ENV, gamma, grid=GRID)
    for g in range(len(GRID)):
        mu = GRID[g]
        a = MDP.profiles[policy[g]]
        r0 = ENV.reward(mu, a)
        nxt = GRID.project(ENV.step(mu, a).next_state)
        r1 = ENV.reward(GRID[nxt], MDP.profiles[policy[nxt]])
        assert v2[g] == pytest.approx(r0 + gamma * r1, abs=1e-14)


def test_T_single_profile_equals_T_a_and_dominated_profile_ignored():
    v = np.random.default_rng(1).standard_normal(len(GRID))
    one = projected_mdp(ENV, GRID, profiles=MDP.profiles[:1])
    np.testing.assert_allclose(bellman_T(v, one, 0.9), bellman_T_a(v, np.zeros(len(GRID), int), one, 0.9))
    # duplicate a profile with a much lower reward: it never wins the max
    dominated = ProjectedMDP(
        GRID,
        np.vstack([MDP.profiles, MDP.profiles[:1]]),
        MDP.panel,
        np.concatenate([MDP.next_index, MDP.next_index[:, :1]], axis=1),
        np.concatenate([MDP.rewards, MDP.rewards[:, :1] - 100], axis=1),
    )
    np.testing.assert_array_equal(bellman_T(v, dominated, 0.9), bellman_T(v, MDP, 0.9))


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), gamma=st.floats(0.0, 0.99))
def test_T_contraction_and_monotonicity(seed, gamma):
    rng = np.random.default_rng(seed)
    v1, v2 = rng.normal(0, 5, (2, len(GRID)))
    t1, t2 = bellman_T(v1, MDP, gamma), bellman_T(v2, MDP, gamma)
    assert np.max(np.abs(t1 - t2)) <= gamma * np.max(np.abs(v1 - v2)) + 1e-12
    hi = v1 + np.abs(rng.normal(size=len(GRID)))
    assert np.all(bellman_T(v1, MDP, gamma) <= bellman_T(hi, MDP, gamma) + 1e-12)


def test_value_iteration_gamma_zero():
    v = value_iteration(MDP, gamma=0.0)
    assert v.sweeps == 1
    np.testing.assert_allclose(v.values, MDP.rewards.max(axis=1))
    np.testing.assert_array_equal(exact_q(MDP, gamma=0.0).values, MDP.rewards)


def test_value_iteration_constant_reward():
    env = constant_env(0.7)
    v = value_iteration(env, GRID, gamma=0.9, tol=1e-10)
    np.testing.assert_allclose(v.values, 0.7 / 0.1, atol=1e-10)


def test_value_iteration_rejects_bad_inputs():
    with pytest.raises(ValueError):
        value_iteration(MDP, gamma=0.9, tol=0.0)
    with pytest.raises(ValueError):
        value_iteration(MDP, gamma=1.0)
    with pytest.raises(IterationCap):
        value_iteration(MDP, gamma=0.99, tol=1e-12, max_sweeps=3)


def test_value_iteration_within_tol_of_fixed_point():
    tol = 1e-6
    coarse = value_iteration(MDP, gamma=0.9, tol=tol)
    sharp = value_iteration(MDP, gamma=0.9, tol=1e-13)
    assert np.max(np.abs(coarse.values - sharp.values)) <= tol / 2


def test_exact_q_consistent_with_value_iteration():
    tol = 1e-8
    q = exact_q(MDP, gamma=0.9, tol=tol)
    v = value_iteration(MDP, gamma=0.9, tol=tol)
    assert np.max(np.abs(q.state_values() - v.values)) <= 2 * tol


def test_exact_q_matches_brute_force():
    gamma, horizon = 0.5, 40
    brute = brute_force_values(MDP, gamma, horizon)
    q = exact_q(MDP, gamma=gamma, tol=1e-13)
    slack = gamma**horizon * MDP.reward_bound / (1 - gamma)
    assert np.max(np.abs(q.state_values() - brute)) <= slack + 1e-13


def test_exact_q_independent_of_profile_order():
    perm = np.random.default_rng(3).permutation(len(MDP.profiles))
    shuffled = projected_mdp(ENV, GRID, profiles=MDP.profiles[perm])
    q = exact_q(MDP, gamma=0.9, tol=1e-12).values
    q_perm = exact_q(shuffled, gamma=0.9, tol=1e-12).values
    np.testing.assert_allclose(q_perm, q[:, perm], atol=1e-12)


def test_verification_property():
    """The greedy policy of V evaluates on the projected dynamics to V itself."""
    gamma = 0.9
    q = exact_q(MDP, gamma=gamma, tol=1e-12)
    policy = grid_policy(GRID, MDP.profiles, q.greedy())
    for g in range(len(GRID)):
        ev = evaluate_policy(ENV, policy, GRID[g], gamma, 400, grid=GRID)
        assert ev.mean == pytest.approx(q.state_values()[g], abs=1e-9 + ev.truncation_bound)


def test_noise_panel_expectation_in_dp():
    env = CyberEnv(CyberParams(noise_std=0.3))
    grid = enumerate_grid(4, 3)
    mdp = projected_mdp(env, grid, panel=env.noise_panel(3))
    assert mdp.next_index.shape[2] == 3
    v = np.arange(len(grid), dtype=float)
    manual = v[mdp.next_index] @ mdp.panel.weights
    np.testing.assert_allclose(mdp.expected(v), manual)


def test_evaluate_policy_examples():
    zero = constant_env(0.0)
    pol = lambda mu: np.array([0, 1])
    assert evaluate_policy(zero, pol, [0.5, 0.5], 0.9, 10).mean == 0.0
    ev = evaluate_policy(ENV, pol, [0.3, 0.7], 0.9, 1)
    assert ev.mean == pytest.approx(ENV.reward(np.array([0.3, 0.7]), np.array([0, 1])))
    det = evaluate_policy(ENV, pol, [0.3, 0.7], 0.9, 50, n_noise_rollouts=7)
    assert det.std == 0.0 and det.n_rollouts == 1
    with pytest.raises(ValueError):
        evaluate_policy(ENV, pol, [0.3, 0.7], 0.9, 0)


def test_evaluate_policy_noisy_reproducible():
    env = CyberEnv(CyberParams(noise_std=0.3))
    pol = lambda mu: np.ones(4)
    a = evaluate_policy(env, pol, np.full(4, 0.25), 0.9, 30, 5, np.random.default_rng(2))
    b = evaluate_policy(env, pol, np.full(4, 0.25), 0.9, 30, 5, np.random.default_rng(2))
    assert a == b and a.n_rollouts == 5
