import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfrl.analysis import (
    BoundInputs,
    action_gap,
    argmaxe,
    corollary_bound,
    empirical_corollary_check,
    lipschitz_probe,
    nepi_order,
    optimal_tau,
    refinement_errors,
    softmax_tau,
    stationarity_residual,
    swarm_metrics,
    theorem_error,
)
from mfrl.dp import ExactQTable, exact_q
from mfrl.envs import CyberEnv, LogisticEnv, MeanFieldEnv, SwarmParams, TransitionResult, swarm_optimal_control
from mfrl.envs import swarm_stationary_density, swarm_step
from mfrl.errors import GridMismatch
from mfrl.mfq import LearnedQTable
from mfrl.simplex import enumerate_grid

finite = st.floats(-50, 50, allow_nan=False)


def inputs(**kw):
    base = dict(
        eps=0.01, gamma=0.5, L_V=1.0, L_Phi=1.0, L_f=1.0, eps_S=0.1, T_cov=10.0, kappa=0.7,
        delta=0.1, V_max=10.0, K_A=0.5, n_grid=9, n_profiles=4,
    )
    base.update(kw)
    return BoundInputs(**base)


# --------------------------------------------------------------------------
# softmax and argmaxe


def test_softmax_examples():
    np.testing.assert_allclose(softmax_tau([2.0, 2.0, 2.0], 3.0), [1 / 3] * 3)
    np.testing.assert_allclose(softmax_tau([0.0, math.log(3)], 1.0), [0.25, 0.75], atol=1e-15)
    x = np.array([0.0, 0.1, 0.3])
    assert softmax_tau(x, 1e4 / 0.2).max() >= 1 - 1e-6
    assert np.all(np.isfinite(softmax_tau([1e300, 0.0], 10.0)))
    with pytest.raises(ValueError):
        softmax_tau(x, 0.0)


def test_argmaxe_examples():
    np.testing.assert_array_equal(argmaxe([1, 2, 2]), [0, 0.5, 0.5])
    np.testing.assert_array_equal(argmaxe([1, 2, 3, 4]), [0, 0, 0, 1])
    np.testing.assert_array_equal(argmaxe([5, 5, 5, 5]), [0.25] * 4)
    np.testing.assert_array_equal(argmaxe([1.0, 1.0 + 1e-13]), [0.5, 0.5])


@settings(max_examples=200, deadline=None)
@given(x=st.lists(finite, min_size=1, max_size=8), c=finite, tau=st.floats(0.01, 20))
def test_softmax_shift_invariant(x, c, tau):
    x = np.array(x)
    p = softmax_tau(x, tau)
    assert abs(p.sum() - 1) <= 1e-12
    assert np.max(np.abs(p - softmax_tau(x + c, tau))) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(x=st.lists(st.integers(-5, 5), min_size=1, max_size=8), c=st.floats(0.1, 10))
def test_argmaxe_scale_invariant(x, c):
    x = np.array(x, dtype=float)
    np.testing.assert_array_equal(argmaxe(x), argmaxe(c * x))
    np.testing.assert_array_equal(argmaxe(x) > 0, argmaxe(x + 3.0) > 0)


@settings(max_examples=200, deadline=None)
@given(n=st.integers(1, 8), seed=st.integers(0, 2**32 - 1), tau=st.floats(0.01, 20))
def test_softmax_lipschitz(n, seed, tau):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(0, 3, (2, n))
    lhs = np.linalg.norm(softmax_tau(x, tau) - softmax_tau(y, tau))
    assert lhs <= tau * np.max(np.abs(x - y)) * math.sqrt(n) + 1e-9


# --------------------------------------------------------------------------
# bounds


def test_theorem_error_examples():
    assert theorem_error(inputs(eps=0.0, eps_S=0.0)) == 0.0
    assert theorem_error(inputs()) == pytest.approx(0.41)
    base = theorem_error(inputs())
    for name in ("eps", "eps_S", "L_V", "L_Phi", "L_f"):
        assert theorem_error(inputs(**{name: getattr(inputs(), name) * 2})) > base


def test_bound_inputs_validation():
    for bad in (dict(gamma=1.0), dict(kappa=0.5), dict(delta=0.0), dict(T_cov=0.0), dict(eps=-1.0)):
        with pytest.raises(ValueError):
            inputs(**bad)
    assert inputs(gamma=0.5).beta == 0.25
    assert inputs(T_cov=10.0, delta=0.1).T_cov_delta == math.ceil(10 * math.log2(5))


def test_nepi_order_examples():
    assert nepi_order(inputs(T_cov=20.0)) > nepi_order(inputs(T_cov=10.0))
    # halving eps multiplies the first summand by at least (1/eps^2)^(1/kappa) ratio = 4^(1/kappa)
    k = 0.7
    a, b = inputs(eps=0.01, kappa=k), inputs(eps=0.005, kappa=k)
    second = lambda i: (i.T_cov_delta / i.beta * math.log(i.V_max / i.eps)) ** (1 / (1 - k))
    first_a, first_b = nepi_order(a) - second(a), nepi_order(b) - second(b)
    assert first_b / first_a >= 4 ** (1 / k)
    # beta plumbing: gamma=0.5 means beta=0.25 inside; check the contraction term directly
    i = inputs(gamma=0.5, eps=1.0, V_max=1.0)  # both logs vanish except the first
    assert i.beta == 0.25
    with pytest.raises(ValueError):
        nepi_order(inputs(eps=0.0))


def test_corollary_bound_examples():
    assert corollary_bound(1e-12, 0.3, 4, 2.0) == pytest.approx(8.0)
    vals = [corollary_bound(t, 0.0, 4, 2.0) for t in (0.5, 1, 2, 4)]
    assert vals == sorted(vals, reverse=True)
    assert vals[1] == pytest.approx(8 * math.exp(-2))
    assert corollary_bound(1.0, 0.1, 4, 2.0) == pytest.approx(0.1 + 8 * math.exp(-2))
    assert corollary_bound(1.0, 0.1, 4, 2.0) == pytest.approx(1.1827, abs=1e-4)


def test_optimal_tau_matches_stationary_point():
    eps, n, k = 0.01, 4, 2.0
    tau, bound = optimal_tau(eps, n, k)
    # d/dtau [tau eps + 2 n e^{-tau K}] = 0  =>  tau = ln(2 n K / eps) / K
    assert tau == pytest.approx(math.log(2 * n * k / eps) / k, rel=1e-6)
    assert bound <= corollary_bound(tau * 1.01, eps, n, k)
    assert optimal_tau(0.0, n, k)[0] == 1e8


def test_action_gap_examples():
    assert action_gap(np.array([[1.0, 3.0, 3.0]])) == 2.0
    assert action_gap(np.ones((3, 4))) == math.inf
    env = CyberEnv()
    q = exact_q(env, enumerate_grid(4, 2), gamma=0.5, tol=1e-10)
    assert action_gap(q) > 0


def _tables(values):
    grid = enumerate_grid(2, len(values) - 1)
    profiles = np.array([[0, 0], [0, 1], [1, 0]])
    exact = ExactQTable(grid, profiles, np.asarray(values, dtype=float))
    return grid, profiles, exact


def test_corollary_check_examples():
    values = [[0.0, 1.0, 0.5], [2.0, 0.0, 1.0], [0.0, 0.0, 3.0]]
    grid, profiles, exact = _tables(values)
    same = LearnedQTable(grid, profiles, exact.values.copy(), np.zeros((3, 3), int), 0.5, 0.7)
    rep = empirical_corollary_check(same, exact, 100.0)
    assert rep.passed and rep.lhs_max < 1e-20 and rep.eps_prime == 0
    shifted = LearnedQTable(grid, profiles, exact.values + 0.3, np.zeros((3, 3), int), 0.5, 0.7)
    rep2 = empirical_corollary_check(shifted, exact, 100.0)
    assert rep2.lhs_max == pytest.approx(rep.lhs_max, abs=1e-15)
    other = ExactQTable(enumerate_grid(2, 3), profiles, np.zeros((4, 3)))
    with pytest.raises(GridMismatch):
        empirical_corollary_check(same, other, 1.0)


# --------------------------------------------------------------------------
# lipschitz probe


class LinearEnv(MeanFieldEnv):
    """Two states; next distribution ``P mu``, reward ``c . mu``."""

    kind = "linear"
    finite = True

    def __init__(self, P, c):
        self.P, self.c = np.asarray(P, dtype=float), np.asarray(c, dtype=float)
        self.n_states, self.n_actions = 2, 1
        self.state_dim = self.action_dim = 2
        self.action_box = (0, 0)

    def reward(self, mu, action):
        return float(self.c @ mu)

    def step(self, mu, action, noise=None):
        mu = np.asarray(mu, dtype=float)
        return TransitionResult(self.P @ mu, self.reward(mu, action))


def test_lipschitz_constant_map_is_zero():
    env = LinearEnv([[0.3, 0.3], [0.7, 0.7]], [1.0, 1.0])
    l_phi, l_f = lipschitz_probe(env, enumerate_grid(2, 10), 50, np.random.default_rng(0))
    assert l_phi <= 1e-14 and l_f <= 1e-14  # zero up to rounding of P mu


def test_lipschitz_linear_map_matches_norm():
    P = np.array([[0.9, 0.2], [0.1, 0.8]])
    c = np.array([1.0, -0.5])
    env = LinearEnv(P, c)
    # differences of distributions point along (1, -1): the restricted operator norm
    d = np.array([1.0, -1.0]) / math.sqrt(2)
    l_phi, l_f = lipschitz_probe(env, enumerate_grid(2, 20), 30, np.random.default_rng(0))
    assert l_phi == pytest.approx(np.linalg.norm(P @ d), rel=0.05)
    assert l_f == pytest.approx(abs(c @ d), rel=0.05)


def test_lipschitz_nested_samples_monotone():
    env = LogisticEnv()
    grid = enumerate_grid(2, 30)
    prev = (0.0, 0.0)
    for n in (1, 3, 10, 30):
        cur = lipschitz_probe(env, grid, n, np.random.default_rng(4))
        assert cur[0] >= prev[0] and cur[1] >= prev[1]
        prev = cur
    with pytest.raises(ValueError):
        lipschitz_probe(env, grid, 0, np.random.default_rng(4))


# --------------------------------------------------------------------------
# refinement and swarm metrics


def test_refinement_shrinks_with_resolution():
    res = refinement_errors(LogisticEnv(), (4, 8), 0.5, reference_resolution=16, probe_resolution=64)
    assert res.errors[0] > res.errors[1] > 0
    assert res.ratios[0] >= 1.5
    assert len(res.successive) == 1


def test_swarm_metrics_exact_control():
    p = SwarmParams(n_points=64)
    a_star = swarm_optimal_control(p)
    rep = swarm_metrics(lambda M: a_star, p, np.random.default_rng(0), n_steps=10)
    assert rep.control_error == 0.0
    assert rep.stationarity_residual == pytest.approx(stationarity_residual(p))
    with pytest.raises(ValueError):
        swarm_metrics(lambda M: a_star, p)


def test_swarm_residual_halves():
    r = [stationarity_residual(SwarmParams(n_points=n)) for n in (64, 128, 256)]
    assert 1.5 <= r[0] / r[1] <= 2.5 and 1.5 <= r[1] / r[2] <= 2.5


def test_swarm_relaxation_from_uniform():
    p = SwarmParams(n_points=64)
    a_star, m_star = swarm_optimal_control(p), swarm_stationary_density(p)
    M = np.ones(p.n_points)
    errs = []
    for _ in range(5):
        for _ in range(100):
            M = swarm_step(M, a_star, 0.0, p).next_state
        errs.append(np.sqrt(p.h * np.sum((M - m_star) ** 2)))
    assert all(b <= a for a, b in zip(errs, errs[1:]))
