import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfrl.envs import (
    DI,
    DS,
    UI,
    US,
    CyberEnv,
    CyberParams,
    LogisticEnv,
    NoisePanel,
    SwarmEnv,
    SwarmParams,
    cyber_generator,
    cyber_reward,
    cyber_step,
    env_step,
    make_env,
    periodic_gaussian,
    swarm_advance,
    swarm_operator,
    swarm_optimal_control,
    swarm_phi,
    swarm_reward,
    swarm_stationary_density,
    swarm_step,
    swarm_substep_matrix,
)
from mfrl.errors import BadActionRange, CFLViolation, UnstableStep

ZERO_RATES = dict(lam=0.0, q_rec_D=0.0, q_rec_U=0.0, v_H=0.0, beta_UU=0.0, beta_UD=0.0, beta_DU=0.0, beta_DD=0.0)

# --------------------------------------------------------------------------
# cyber


def test_generator_from_all_undefended_susceptible():
    p = CyberParams()
    G = cyber_generator([0, 0, 0, 1], [0, 0, 0, 0], 1.0, p)
    # infection of US machines is the only flow out of the occupied state
    assert G[UI, US] == pytest.approx(p.v_H * p.q_inf_U)
    assert G[DS, US] == 0.0
    infection_entries = {(DI, DS), (UI, US)}
    for (i, j) in infection_entries:
        assert G[i, j] >= 0
    assert G[DI, DS] == pytest.approx(p.v_H * p.q_inf_D)  # peer terms vanish with no infected mass
    # recovery rates do not depend on mu or a: they are the other nonzero off-diagonals
    assert G[DS, DI] == p.q_rec_D and G[US, UI] == p.q_rec_U
    off = G - np.diag(np.diag(G))
    nonzero = {tuple(ix) for ix in np.argwhere(off != 0)}
    assert nonzero == {(DI, DS), (UI, US), (DS, DI), (US, UI)}


def test_generator_zero_rates_is_zero():
    p = CyberParams(**ZERO_RATES)
    assert np.all(cyber_generator([0.1, 0.2, 0.3, 0.4], [1, 0, 1, 0], 1.0, p) == 0)


def test_generator_entries():
    p = CyberParams()
    mu = np.array([0.1, 0.2, 0.3, 0.4])
    a = np.array([1.0, 0.0, 0.5, 1.0])
    nu = 1.3
    G = cyber_generator(mu, a, nu, p)
    assert G[DI, DS] == pytest.approx(nu * (p.v_H * p.q_inf_D + p.beta_DD * mu[DI] + p.beta_UD * mu[UI]))
    assert G[UI, US] == pytest.approx(nu * (p.v_H * p.q_inf_U + p.beta_UU * mu[UI] + p.beta_DU * mu[DI]))
    assert G[DI, UI] == pytest.approx(p.lam * a[UI])
    assert G[UI, DI] == pytest.approx(p.lam * a[DI])
    assert G[DS, US] == pytest.approx(p.lam * a[US])
    assert G[US, DS] == pytest.approx(p.lam * a[DS])


def test_generator_rejects_out_of_range_action():
    with pytest.raises(BadActionRange):
        cyber_generator([0.25] * 4, [0, 2, 0, 0])


def test_generator_columns_sum_to_zero():
    rng = np.random.default_rng(1)
    p = CyberParams()
    for _ in range(1000):
        G = cyber_generator(rng.dirichlet(np.ones(4)), rng.uniform(0, 1, 4), float(rng.lognormal()), p)
        assert np.max(np.abs(G.sum(axis=0))) <= 1e-14


def test_cyber_step_examples():
    p = CyberParams(**ZERO_RATES)
    mu = np.array([0.1, 0.2, 0.3, 0.4])
    np.testing.assert_array_equal(cyber_step(mu, [1, 1, 0, 0], 1.0, p).next_state, mu)
    only = CyberParams(**{**ZERO_RATES, "v_H": 0.6}, dt=0.1)
    r = 0.1 * only.v_H * only.q_inf_U
    np.testing.assert_allclose(cyber_step([0, 0, 0, 1], [0, 0, 0, 0], 1.0, only).next_state, [0, 0, r, 1 - r], atol=1e-15)


def test_cyber_unstable_dt_rejected():
    with pytest.raises(UnstableStep):
        CyberParams(dt=2.0)


def test_cyber_reward_examples():
    assert cyber_reward([0, 0, 0, 1]) == 0.0
    p = CyberParams()
    assert cyber_reward([1, 0, 0, 0], p) == pytest.approx(-(p.k_D + p.k_I))
    assert cyber_reward([0.25] * 4, CyberParams(k_D=2, k_I=3)) == pytest.approx(-2.5)


@settings(max_examples=200, deadline=None)
@given(
    w=st.lists(st.floats(0.0, 1.0), min_size=4, max_size=4).filter(lambda w: sum(w) > 1e-3),
    a=st.lists(st.floats(0.0, 1.0), min_size=4, max_size=4),
    nu=st.floats(0.5, 2.0),
)
def test_cyber_step_conserves_mass_and_positivity(w, a, nu):
    mu = np.asarray(w) / sum(w)
    p = CyberParams(dt=0.1)
    nxt = cyber_step(mu, a, nu, p).next_state
    assert abs(nxt.sum() - mu.sum()) <= 1e-12
    assert nxt.min() >= -1e-12


def test_env_step_matches_cyber_step():
    env = CyberEnv()
    mu, a = np.array([0.4, 0.1, 0.3, 0.2]), np.array([1, 0, 1, 0])
    r1 = env_step(env, mu, a)
    r2 = cyber_step(mu, a, 1.0, env.params)
    np.testing.assert_array_equal(r1.next_state, r2.next_state)
    assert r1.reward == r2.reward


def test_env_step_noise_reproducible():
    env = CyberEnv(CyberParams(noise_std=0.3))
    mu, a = np.full(4, 0.25), np.ones(4)
    with pytest.raises(ValueError):
        env_step(env, mu, a)

    def run(seed):
        rng = np.random.default_rng(seed)
        m = mu
        for _ in range(20):
            m = env_step(env, m, a, rng).next_state
        return m

    np.testing.assert_array_equal(run(3), run(3))
    assert not np.array_equal(run(3), run(4))


def test_noise_panels():
    env = CyberEnv(CyberParams(noise_std=0.2))
    panel = env.noise_panel(9)
    assert panel.weights.sum() == pytest.approx(1.0)
    # the lognormal factor has unit mean, and Gauss-Hermite integrates it exactly enough
    assert panel.values @ panel.weights == pytest.approx(1.0, abs=1e-10)
    assert len(CyberEnv().noise_panel()) == 1
    with pytest.raises(ValueError):
        NoisePanel(np.array([0.0, 1.0]), np.array([0.7, 0.7]))


# --------------------------------------------------------------------------
# swarm


def test_phi_examples():
    assert swarm_phi(0.0) == pytest.approx(-2 * np.pi**2)
    assert swarm_phi(0.25) == pytest.approx(2 * np.pi**2 + 2)
    assert swarm_phi(0.5) == pytest.approx(-2 * np.pi**2)


def test_swarm_no_dynamics_without_velocity_or_diffusion():
    p = SwarmParams(n_points=16, sigma=0.0)
    M = periodic_gaussian(p, 0.3, 0.1)
    np.testing.assert_allclose(swarm_step(M, np.zeros(16), 0.0, p).next_state, M, rtol=0, atol=1e-14)


def test_swarm_uniform_translation_invariant():
    p = SwarmParams(n_points=16, sigma=0.0)
    M = np.ones(16)
    np.testing.assert_allclose(swarm_step(M, np.full(16, 3.0), 0.0, p).next_state, M, atol=1e-13)


def test_swarm_substep_matrix_matches_operator():
    p = SwarmParams(n_points=24)
    rng = np.random.default_rng(0)
    M = periodic_gaussian(p, 0.4, 0.15)
    v = rng.uniform(-5, 5, 24)
    dts = 1e-4
    np.testing.assert_allclose(swarm_substep_matrix(v, dts, p) @ M, M + dts * swarm_operator(M, v, p), atol=1e-13)


def test_swarm_stationarity_residual_first_order():
    res = []
    for n in (64, 128, 256):
        p = SwarmParams(n_points=n)
        M = swarm_stationary_density(p)
        nxt = swarm_step(M, swarm_optimal_control(p), 0.0, p).next_state
        res.append(np.sqrt(p.h * np.sum((nxt - M) ** 2)))
    assert res[0] / res[1] >= 1.5 and res[1] / res[2] >= 1.5


def test_swarm_reward_examples():
    n = 512
    p = SwarmParams(n_points=n)
    M = np.ones(n)
    base = swarm_reward(M, np.zeros(n), p)
    assert base == pytest.approx(np.mean(swarm_phi(p.x)))
    assert base == pytest.approx(-np.pi**2, rel=1e-6)
    assert swarm_reward(M, np.full(n, 2.0), p) == pytest.approx(base - 2.0)
    floor = M.copy()
    floor[0] = 0.0
    assert np.isfinite(swarm_reward(floor, np.zeros(n), p))


def test_swarm_cfl_checked_for_fixed_substeps():
    p = SwarmParams(n_points=32, n_substeps=1)
    with pytest.raises(CFLViolation):
        swarm_step(np.ones(32), np.zeros(32), 0.0, p)


@settings(max_examples=100, deadline=None)
@given(mean=st.floats(0, 1), std=st.floats(0.05, 0.3), vmax=st.floats(0.0, 10.0), seed=st.integers(0, 2**32 - 1))
def test_swarm_mass_and_positivity(mean, std, vmax, seed):
    p = SwarmParams(n_points=32)
    M = periodic_gaussian(p, mean, std)
    v = np.random.default_rng(seed).uniform(-vmax, vmax, 32)
    nxt, mass = swarm_advance(M, v, p)
    assert abs(mass - M.sum() * p.h) <= 1e-10
    assert nxt.min() >= 0.0
    assert nxt.sum() * p.h == pytest.approx(1.0, abs=1e-12)


def test_swarm_common_noise_shifts_velocity():
    p = SwarmParams(n_points=16, noise_std=1.0)
    env = SwarmEnv(p)
    M = periodic_gaussian(p, 0.5, 0.1)
    a = np.zeros(16)
    np.testing.assert_allclose(env.step(M, a, 0.7).next_state, swarm_step(M, a + 0.7, 0.0, SwarmParams(n_points=16)).next_state)


# --------------------------------------------------------------------------
# logistic test instance


def test_logistic_kernel_is_stochastic_and_mass_conserving():
    env = LogisticEnv()
    rng = np.random.default_rng(0)
    for _ in range(100):
        mu = rng.dirichlet(np.ones(2))
        a = rng.integers(0, 2, 2)
        K = env.kernel(mu, a)
        np.testing.assert_allclose(K.sum(axis=0), 1.0)
        assert env.step(mu, a).next_state.sum() == pytest.approx(1.0, abs=1e-12)


def test_make_env():
    assert make_env("cyber").kind == "cyber"
    assert make_env("swarm", n_points=16).params.n_points == 16
    assert make_env("logistic").n_states == 2
    with pytest.raises(ValueError):
        make_env("nope")
