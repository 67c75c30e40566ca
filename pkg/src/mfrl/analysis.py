"""Error bounds, action-selection maps and benchmark metrics.

The bound formulas take their constants from :class:`BoundInputs`.  The
Lipschitz constants can be probed empirically with :func:`lipschitz_probe`,
which returns lower bounds, or supplied by hand.  The episode-count formula is
an order bound: its hidden constant is set to 1 and the number is meant for
sensitivity studies, not as a stopping rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from .dp import ExactQTable, exact_q, projected_mdp
from .envs import MeanFieldEnv, SwarmParams, swarm_optimal_control, swarm_stationary_density, swarm_step
from .envs import periodic_gaussian
from .errors import GridMismatch
from .simplex import SimplexGrid, enumerate_action_profiles, enumerate_grid

ARGMAX_TOL = 1e-12


def softmax_tau(x, tau: float) -> np.ndarray:
    """``exp(tau x) / sum(exp(tau x))``, shifted by the max for overflow safety."""
    x = np.asarray(x, dtype=float)
    if tau <= 0:
        raise ValueError("tau must be positive")
    z = tau * (x - x.max(axis=-1, keepdims=True))
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def argmaxe(x, tol: float = ARGMAX_TOL) -> np.ndarray:
    """Uniform distribution over the (tolerance-) maximizers of ``x``."""
    x = np.asarray(x, dtype=float)
    hit = x >= x.max(axis=-1, keepdims=True) - tol
    return hit / hit.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class BoundInputs:
    """Constants of the convergence bound.

    ``n_grid`` and ``n_profiles`` are the sizes of the lattice and of the
    action-profile set.  ``eps``, ``eps_S`` and the Lipschitz constants may be
    zero; everything else must be positive.
    """

    eps: float
    gamma: float
    L_V: float
    L_Phi: float
    L_f: float
    eps_S: float
    T_cov: float
    kappa: float
    delta: float
    V_max: float
    K_A: float
    n_grid: int
    n_profiles: int

    def __post_init__(self):
        for name in ("eps", "L_V", "L_Phi", "L_f", "eps_S"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        for name in ("T_cov", "V_max", "K_A", "n_grid", "n_profiles"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if not 0.5 < self.kappa < 1.0:
            raise ValueError("kappa must lie in (1/2, 1)")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")

    @property
    def beta(self) -> float:
        return (1.0 - self.gamma) / 2.0

    @property
    def T_cov_delta(self) -> int:
        """``ceil(T_cov log2(1 / (2 delta)))``, floored at 1 (the log is negative for delta > 1/2)."""
        return max(1, math.ceil(self.T_cov * math.log2(1.0 / (2.0 * self.delta))))


def theorem_error(inputs: BoundInputs) -> float:
    """``eps + [gamma (2 - gamma) / (1 - gamma) L_V (1 + L_Phi) + L_f] eps_S``."""
    g = inputs.gamma
    coeff = g * (2 - g) / (1 - g) * inputs.L_V * (1 + inputs.L_Phi) + inputs.L_f
    return inputs.eps + coeff * inputs.eps_S


def nepi_order(inputs: BoundInputs) -> float:
    """Episode-count order bound with unit constant.

    Sum of two terms: the statistical term
    ``(T^(1+3k) V^2 ln(|grid| |profiles| V / (2 delta beta eps)) / (beta eps)^2)^(1/k)``
    and the contraction term ``(T / beta ln(V / eps))^(1/(1-k))``, with
    ``T = T_cov(delta)``.  Logarithms are floored at zero; ``eps`` must be
    positive here.
    """
    if inputs.eps <= 0:
        raise ValueError("eps must be positive for the episode count")
    k, b, v, e = inputs.kappa, inputs.beta, inputs.V_max, inputs.eps
    t = float(inputs.T_cov_delta)
    log1 = max(0.0, math.log(inputs.n_grid * inputs.n_profiles * v / (2 * inputs.delta * b * e)))
    first = (t ** (1 + 3 * k) * v**2 * log1 / (b**2 * e**2)) ** (1.0 / k)
    second = (t / b * max(0.0, math.log(v / e))) ** (1.0 / (1.0 - k))
    return first + second


def corollary_bound(tau: float, eps_prime: float, action_count: int, K_A: float) -> float:
    """``tau eps' + 2 |A| exp(-tau K_A)``."""
    if tau <= 0 or eps_prime < 0 or action_count < 1 or K_A <= 0:
        raise ValueError("need tau > 0, eps' >= 0, action_count >= 1, K_A > 0")
    return tau * eps_prime + 2 * action_count * math.exp(-tau * K_A)


def optimal_tau(eps_prime: float, action_count: int, K_A: float, tau_max: float = 1e8) -> tuple[float, float]:
    """Minimize :func:`corollary_bound` over ``tau`` in ``(0, tau_max]``; returns ``(tau, bound)``.

    Bounded Brent search in ``log tau`` with absolute tolerance 1e-8.  When
    ``eps' = 0`` the bound decreases forever and ``tau_max`` is returned.
    """
    if eps_prime == 0:
        return tau_max, corollary_bound(tau_max, 0.0, action_count, K_A)
    res = minimize_scalar(
        lambda s: corollary_bound(math.exp(s), eps_prime, action_count, K_A),
        bounds=(math.log(1e-12), math.log(tau_max)),
        method="bounded",
        options={"xatol": 1e-8},
    )
    tau = float(math.exp(res.x))
    return tau, corollary_bound(tau, eps_prime, action_count, K_A)


def _table_values(table) -> np.ndarray:
    return np.asarray(getattr(table, "values", table), dtype=float)


def action_gap(exact, tol: float = ARGMAX_TOL) -> float:
    """Smallest distance from a row maximum to the largest strictly smaller entry.

    Entries within ``tol`` of the maximum count as maximizers.  Returns ``inf``
    when every row is constant.
    """
    q = _table_values(exact)
    if q.ndim != 2 or q.shape[1] < 2:
        raise ValueError("need a 2-d table with at least two action profiles")
    top = q.max(axis=1, keepdims=True)
    below = np.where(q < top - tol, q, -np.inf)
    gaps = top[:, 0] - below.max(axis=1)
    return float(gaps.min())


@dataclass(frozen=True)
class CorollaryReport:
    tau: float
    lhs_max: float
    bound: float
    eps_prime: float
    action_gap: float
    passed: bool

    def rows(self):
        return [
            ("softmax_argmax_distance", self.lhs_max, self.bound, "PASS" if self.passed else "FAIL"),
            ("eps_prime", self.eps_prime, float("nan"), ""),
            ("action_gap", self.action_gap, float("nan"), ""),
        ]


def empirical_corollary_check(learned, exact, tau: float) -> CorollaryReport:
    """Compare the softmax of a learned table with the argmax set of an exact one.

    The measured sup-norm gap between the tables plays the role of ``eps'``
    and the exact table's action gap plays ``K_A``.  With every row constant
    the gap is infinite and the exponential term vanishes.
    """
    lq, eq = _table_values(learned), _table_values(exact)
    if lq.shape != eq.shape:
        raise GridMismatch(f"table shapes {lq.shape} and {eq.shape} differ")
    lg, eg = getattr(learned, "grid", None), getattr(exact, "grid", None)
    if lg is not None and eg is not None and (lg.dimension, lg.resolution) != (eg.dimension, eg.resolution):
        raise GridMismatch("tables live on different lattices")
    lhs = float(np.max(np.linalg.norm(softmax_tau(lq, tau) - argmaxe(eq), axis=1)))
    eps_prime = float(np.max(np.abs(lq - eq)))
    k_a = action_gap(eq)
    n = eq.shape[1]
    bound = tau * eps_prime + (0.0 if np.isinf(k_a) else 2 * n * math.exp(-tau * k_a))
    return CorollaryReport(tau, lhs, bound, eps_prime, k_a, lhs <= bound + 1e-9)


# --------------------------------------------------------------------------
# empirical regularity and refinement
# --------------------------------------------------------------------------


def lipschitz_probe(
    env: MeanFieldEnv,
    grid_or_sampler,
    n_pairs: int,
    rng: np.random.Generator,
    *,
    profiles=None,
    panel=None,
) -> tuple[float, float]:
    """Empirical Lipschitz ratios of the transition map and of the reward in the state.

    Pairs come from ``grid_or_sampler`` (a lattice, drawing two points
    uniformly, or a callable ``rng -> mu``).  For each pair the ratios are
    maximized over all action profiles; transitions are averaged over the noise
    panel.  Pairs are drawn one after another, so a smaller ``n_pairs`` with the
    same seed probes a prefix of the same sample and the estimates are
    non-decreasing in ``n_pairs``.  The results are lower bounds on the true
    constants.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be at least 1")
    if profiles is None:
        profiles = enumerate_action_profiles(env.n_states, env.n_actions)
    if panel is None:
        panel = env.noise_panel()
    if isinstance(grid_or_sampler, SimplexGrid):
        grid = grid_or_sampler

        def draw(r):
            return grid[int(r.integers(len(grid)))]
    else:
        draw = grid_or_sampler
    l_phi = l_f = 0.0
    for _ in range(n_pairs):
        m1, m2 = np.asarray(draw(rng), dtype=float), np.asarray(draw(rng), dtype=float)
        d = float(np.linalg.norm(m1 - m2))
        if d == 0.0:
            continue
        for a in profiles:
            dphi = sum(
                w * np.linalg.norm(env.step(m1, a, e).next_state - env.step(m2, a, e).next_state)
                for e, w in zip(panel.values, panel.weights)
            )
            l_phi = max(l_phi, dphi / d)
            l_f = max(l_f, abs(env.reward(m1, a) - env.reward(m2, a)) / d)
    return l_phi, l_f


def q_on_points(table: ExactQTable, points) -> np.ndarray:
    """Evaluate ``Q(Proj(mu), .)`` for every row of ``points``."""
    return table.values[table.grid.project_many(points)]


@dataclass(frozen=True)
class RefinementResult:
    resolutions: tuple
    reference_resolution: int
    errors: tuple  # sup error against the reference table, per resolution
    successive: tuple  # sup gap between consecutive resolutions

    @property
    def ratios(self) -> tuple:
        e = self.errors
        return tuple(e[i] / e[i + 1] for i in range(len(e) - 1) if e[i + 1] > 0)


def refinement_errors(
    env: MeanFieldEnv,
    resolutions,
    gamma: float,
    *,
    reference_resolution: int | None = None,
    probe_resolution: int = 128,
    tol: float = 1e-10,
) -> RefinementResult:
    """Grid-refinement study of the projected Q table.

    Every table is compared through the projection on a probe set, the
    lattice of resolution ``probe_resolution``: ``errors[i]`` is
    ``sup |Q(N_i) o Proj - Q(ref) o Proj|`` and ``successive[i]`` compares
    resolutions ``i`` and ``i + 1``.
    """
    resolutions = tuple(int(n) for n in resolutions)
    ref_res = reference_resolution or max(resolutions)
    probe = enumerate_grid(env.n_states, probe_resolution).points
    tables = {}
    for n in sorted(set(resolutions) | {ref_res}):
        grid = enumerate_grid(env.n_states, n)
        tables[n] = q_on_points(exact_q(projected_mdp(env, grid), gamma=gamma, tol=tol), probe)
    ref = tables[ref_res]
    errors = tuple(float(np.max(np.abs(tables[n] - ref))) for n in resolutions if n != ref_res)
    successive = tuple(
        float(np.max(np.abs(tables[a] - tables[b]))) for a, b in zip(resolutions[:-1], resolutions[1:])
    )
    return RefinementResult(resolutions, ref_res, errors, successive)


# --------------------------------------------------------------------------
# swarm benchmark
# --------------------------------------------------------------------------


def l2_norm(v, h: float) -> float:
    """Grid L2 norm ``sqrt(h sum v^2)``."""
    return float(np.sqrt(h * np.sum(np.asarray(v, dtype=float) ** 2)))


@dataclass(frozen=True)
class SwarmReport:
    control_error: float
    density_error: float
    stationarity_residual: float
    n_steps: int

    def rows(self):
        return [
            ("control_error", self.control_error),
            ("density_error", self.density_error),
            ("stationarity_residual", self.stationarity_residual),
        ]


def stationarity_residual(params: SwarmParams) -> float:
    """``|| Phi(M*, a*) - M* ||`` in the grid L2 norm (not divided by ``dt``)."""
    m_star = swarm_stationary_density(params)
    nxt = swarm_step(m_star, swarm_optimal_control(params), 0.0, params).next_state
    return l2_norm(nxt - m_star, params.h)


def swarm_metrics(
    actor: Callable[[np.ndarray], np.ndarray],
    params: SwarmParams,
    rng: np.random.Generator | None = None,
    *,
    n_steps: int = 500,
    initial=None,
) -> SwarmReport:
    """Compare a feedback control with the closed-form stationary solution.

    * control error: ``M*``-weighted L2 distance between ``actor(M*)`` and ``a*``;
    * density error: L2 distance to ``M*`` after ``n_steps`` steps under the
      actor, from ``initial`` or from a Gaussian with random center and width
      drawn from ``rng``;
    * stationarity residual of the discrete scheme, see :func:`stationarity_residual`.
    """
    m_star = swarm_stationary_density(params)
    a_star = swarm_optimal_control(params)
    ctrl = float(np.sqrt(params.h * np.sum(m_star * (np.asarray(actor(m_star)) - a_star) ** 2)))
    if initial is None:
        if rng is None:
            raise ValueError("need rng or an initial density")
        initial = periodic_gaussian(params, rng.uniform(0.0, 1.0), rng.uniform(0.05, 0.25))
    M = np.asarray(initial, dtype=float)
    for _ in range(n_steps):
        M = swarm_step(M, actor(M), 0.0, params).next_state
    return SwarmReport(ctrl, l2_norm(M - m_star, params.h), stationarity_residual(params), n_steps)
