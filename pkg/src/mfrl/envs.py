"""Population-level simulators: the distribution map and the lifted reward.

Every environment maps ``(mu, action profile, common noise)`` to the next
distribution and reports the population reward ``E_{x~mu} f(x, mu, a(x))``
evaluated at the *current* distribution.  Three environments are provided:

``CyberEnv``
    four-state computer-security model (states DI, DS, UI, US) driven by a
    controlled rate matrix, stepped with explicit Euler.
``SwarmEnv``
    density on the unit torus transported by a velocity field with
    idiosyncratic diffusion, stepped with a conservative upwind scheme.
``LogisticEnv``
    small synthetic model whose per-state transition probabilities are
    softmax functions of the population, used as a test instance for the
    tabular solvers.

The common noise is a scalar per step: a lognormal multiplier on infection
rates (cyber), a shared drift (swarm), a shift of the logits (logistic).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadActionRange,
    CFLViolation,
    DimensionMismatch,
    NegativeDensity,
    UnstableStep,
)

NEG_TOL = 1e-12

DI, DS, UI, US = 0, 1, 2, 3
CYBER_STATES = ("DI", "DS", "UI", "US")


@dataclass(frozen=True)
class TransitionResult:
    next_state: np.ndarray
    reward: float


@dataclass(frozen=True)
class NoisePanel:
    """Fixed quadrature over the common noise: ``E g(e) ~ sum_k w_k g(e_k)``."""

    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        v = np.atleast_1d(np.asarray(self.values, dtype=float))
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if v.shape != w.shape:
            raise DimensionMismatch("values and weights differ in length")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("panel weights must be nonnegative and sum to 1")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.values.size

    @classmethod
    def single(cls, value: float) -> "NoisePanel":
        return cls(np.array([value]), np.array([1.0]))

    @classmethod
    def gauss_hermite(cls, n: int) -> "NoisePanel":
        """Nodes and weights for a standard normal variable."""
        x, w = np.polynomial.hermite_e.hermegauss(n)
        return cls(x, w / w.sum())


class MeanFieldEnv:
    """Shared surface of the simulators.

    Subclasses define ``state_dim``, ``action_dim``, ``action_box``,
    ``step(mu, action, noise)``, ``reward(mu, action)``, ``neutral_noise`` and
    the standard-normal-to-noise map ``noise_from_normal``.
    """

    kind = "abstract"
    finite = False
    noise_std = 0.0
    neutral_noise = 0.0

    @property
    def deterministic(self) -> bool:
        return self.noise_std == 0.0

    def noise_from_normal(self, z: float) -> float:
        raise NotImplementedError

    def sample_noise(self, rng: np.random.Generator) -> float:
        if self.deterministic:
            return self.neutral_noise
        return self.noise_from_normal(rng.standard_normal())

    def noise_panel(self, n_nodes: int = 7) -> NoisePanel:
        if self.deterministic:
            return NoisePanel.single(self.neutral_noise)
        base = NoisePanel.gauss_hermite(n_nodes)
        return NoisePanel(np.array([self.noise_from_normal(z) for z in base.values]), base.weights)

    def reward_bound(self) -> float:
        return math.inf

    def clip_action(self, action) -> np.ndarray:
        lo, hi = self.action_box
        return np.clip(np.asarray(action, dtype=float), lo, hi)


def env_step(env: MeanFieldEnv, state, action, rng: np.random.Generator | None = None) -> TransitionResult:
    """One transition with a freshly drawn common-noise sample."""
    if env.deterministic:
        noise = env.neutral_noise
    elif rng is None:
        raise ValueError("a random generator is required when the common noise is enabled")
    else:
        noise = env.sample_noise(rng)
    return env.step(state, action, noise)


# --------------------------------------------------------------------------
# cyber security
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CyberParams:
    """Rates of the four-state cyber model.

    The defaults are a repository choice (defended machines recover faster
    and are infected less), not values taken from any published table.
    """

    lam: float = 0.8
    q_rec_D: float = 0.5
    q_rec_U: float = 0.4
    v_H: float = 0.6
    q_inf_D: float = 0.3
    q_inf_U: float = 0.5
    beta_UU: float = 0.3
    beta_UD: float = 0.4
    beta_DU: float = 0.3
    beta_DD: float = 0.4
    k_D: float = 0.3
    k_I: float = 0.5
    dt: float = 0.1
    noise_std: float = 0.0

    def __post_init__(self):
        for name, value in vars(self).items():
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and nonnegative, got {value}")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.dt * self.max_outflow() > 1.0:
            raise UnstableStep(
                f"dt={self.dt} too large: I + dt*G is not column-stochastic (max out-rate {self.max_outflow():.3g})"
            )

    def max_outflow(self) -> float:
        """Largest total exit rate of any state over all mu and actions in [0, 1] (noise factor 1)."""
        return max(
            self.q_rec_D + self.lam,
            self.v_H * self.q_inf_D + max(self.beta_DD, self.beta_UD) + self.lam,
            self.q_rec_U + self.lam,
            self.v_H * self.q_inf_U + max(self.beta_UU, self.beta_DU) + self.lam,
        )


def _check_cyber_action(action) -> np.ndarray:
    a = np.asarray(action, dtype=float)
    if a.shape != (4,):
        raise DimensionMismatch(f"cyber action must have 4 entries, got shape {a.shape}")
    if np.any(a < 0.0) or np.any(a > 1.0):
        raise BadActionRange(f"cyber actions must lie in [0, 1], got {a}")
    return a


def cyber_generator(mu, action, noise: float = 1.0, params: CyberParams = CyberParams()) -> np.ndarray:
    """Rate matrix ``G`` with ``G[x', x]`` the rate of jumping from ``x`` to ``x'``.

    ``action[x]`` in [0, 1] is the switching intensity chosen for machines in
    state ``x`` (0 = keep the protection level, 1 = switch at rate ``lam``).
    ``noise`` multiplies both infection rates.  Diagonal entries are minus the
    column sums so that ``G @ mu`` conserves mass.
    """
    p = params
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (4,):
        raise DimensionMismatch(f"cyber state must have 4 entries, got shape {mu.shape}")
    a = _check_cyber_action(action)
    G = np.zeros((4, 4))
    G[DI, DS] = noise * (p.v_H * p.q_inf_D + p.beta_DD * mu[DI] + p.beta_UD * mu[UI])
    G[UI, US] = noise * (p.v_H * p.q_inf_U + p.beta_UU * mu[UI] + p.beta_DU * mu[DI])
    G[DS, DI] = p.q_rec_D
    G[US, UI] = p.q_rec_U
    G[DI, UI] = p.lam * a[UI]
    G[UI, DI] = p.lam * a[DI]
    G[DS, US] = p.lam * a[US]
    G[US, DS] = p.lam * a[DS]
    G[np.diag_indices(4)] = -G.sum(axis=0)
    return G


def cyber_reward(mu, params: CyberParams = CyberParams()) -> float:
    mu = np.asarray(mu, dtype=float)
    return -(params.k_D * (mu[DI] + mu[DS]) + params.k_I * (mu[DI] + mu[UI]))


def cyber_step(mu, action, noise: float = 1.0, params: CyberParams = CyberParams()) -> TransitionResult:
    mu = np.asarray(mu, dtype=float)
    G = cyber_generator(mu, action, noise, params)
    nxt = mu + params.dt * (G @ mu)
    if nxt.min() < -NEG_TOL:
        raise UnstableStep(f"negative mass {nxt.min():.3g} after Euler step; reduce dt")
    if nxt.min() < 0.0:
        nxt = np.maximum(nxt, 0.0)
        nxt /= nxt.sum()
    return TransitionResult(nxt, cyber_reward(mu, params))


class CyberEnv(MeanFieldEnv):
    kind = "cyber"
    finite = True
    n_states = 4
    n_actions = 2
    state_dim = 4
    action_dim = 4
    action_box = (0.0, 1.0)
    neutral_noise = 1.0

    def __init__(self, params: CyberParams | None = None):
        self.params = params or CyberParams()
        self.noise_std = self.params.noise_std

    def noise_from_normal(self, z: float) -> float:
        # lognormal with unit mean
        s = self.noise_std
        return float(np.exp(s * z - 0.5 * s * s))

    def step(self, mu, action, noise: float | None = None) -> TransitionResult:
        return cyber_step(mu, action, self.neutral_noise if noise is None else noise, self.params)

    def reward(self, mu, action=None) -> float:
        return cyber_reward(mu, self.params)

    def reward_bound(self) -> float:
        return self.params.k_D + self.params.k_I

    def sample_initial(self, rng: np.random.Generator) -> np.ndarray:
        return rng.dirichlet(np.ones(4))


# --------------------------------------------------------------------------
# swarm on the torus
# --------------------------------------------------------------------------


def swarm_phi(x):
    """Spatial preference term of the swarm reward."""
    s = np.sin(2 * np.pi * x)
    c = np.cos(2 * np.pi * x)
    return -2 * np.pi**2 * (-s + c**2) + 2 * s


@dataclass(frozen=True)
class SwarmParams:
    """Discretization of the swarm model.

    ``dt`` is the time between two decisions.  The finite-difference solver
    splits it into ``n_substeps`` explicit Euler substeps; left as ``None``
    the count is chosen per step so that both the advective and diffusive
    Courant numbers stay at or below 1/2, which keeps the scheme positive.
    """

    n_points: int = 32
    dt: float = 0.01
    sigma: float = 1.0
    density_floor: float = 1e-10
    noise_std: float = 0.0
    n_substeps: int | None = None
    action_bound: float = 10.0

    def __post_init__(self):
        if self.n_points < 8:
            raise ValueError("n_points must be at least 8")
        if self.dt <= 0 or self.sigma < 0 or self.noise_std < 0:
            raise ValueError("dt must be positive, sigma and noise_std nonnegative")
        if self.density_floor <= 0:
            raise ValueError("density_floor must be positive")
        if self.n_substeps is not None and self.n_substeps < 1:
            raise ValueError("n_substeps must be positive")

    @property
    def h(self) -> float:
        return 1.0 / self.n_points

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.n_points) * self.h


def swarm_substeps(velocity_max: float, params: SwarmParams) -> int:
    h, dt = params.h, params.dt
    n = max(
        math.ceil(dt * velocity_max / (0.5 * h)),
        math.ceil(dt * params.sigma**2 / (0.5 * h * h)),
        1,
    )
    return n


def swarm_operator(M: np.ndarray, v: np.ndarray, params: SwarmParams) -> np.ndarray:
    """Right-hand side ``-D_upwind(v M) + (sigma^2 / 2) D2 M`` on the periodic grid."""
    h = params.h
    vp = np.maximum(v, 0.0)
    vm = np.minimum(v, 0.0)
    # flux through the face between cells i and i+1
    flux = vp * M + np.roll(vm * M, -1)
    div = (flux - np.roll(flux, 1)) / h
    lap = (np.roll(M, -1) - 2.0 * M + np.roll(M, 1)) / (h * h)
    return -div + 0.5 * params.sigma**2 * lap


def swarm_substep_matrix(velocity: np.ndarray, dts: float, params: SwarmParams) -> np.ndarray:
    """Dense matrix of one explicit substep, ``I + dts * L`` with ``L M = swarm_operator(M, v)``."""
    n, h = params.n_points, params.h
    v = np.asarray(velocity, dtype=float)
    vp = np.maximum(v, 0.0)
    vm = np.minimum(v, 0.0)
    d = 0.5 * params.sigma**2 / (h * h)
    i = np.arange(n)
    right = (i + 1) % n
    left = (i - 1) % n
    A = np.zeros((n, n))
    A[i, i] = 1.0 - dts * (np.abs(v) / h + 2 * d)
    A[i, right] = dts * (-vm[right] / h + d)
    A[i, left] = dts * (vp[left] / h + d)
    return A


def swarm_advance(M, velocity, params: SwarmParams) -> tuple[np.ndarray, float]:
    """Transport ``M`` over one decision step.

    Returns the new density and its mass before renormalization.
    """
    M = np.asarray(M, dtype=float)
    v = np.asarray(velocity, dtype=float)
    if M.shape != (params.n_points,) or v.shape != (params.n_points,):
        raise DimensionMismatch(f"expected {params.n_points} cells, got {M.shape} and {v.shape}")
    vmax = float(np.max(np.abs(v)))
    n_sub = params.n_substeps or swarm_substeps(vmax, params)
    dts = params.dt / n_sub
    h = params.h
    if dts * vmax / h > 1.0 or dts * params.sigma**2 / (h * h) > 0.5:
        raise CFLViolation(
            f"substep {dts:.3g}: advective number {dts * vmax / h:.3g} (max 1), "
            f"diffusive number {dts * params.sigma**2 / h**2:.3g} (max 0.5)"
        )
    A = np.linalg.matrix_power(swarm_substep_matrix(v, dts, params), n_sub)
    M = A @ M
    if M.min() < -NEG_TOL:
        raise NegativeDensity(f"density {M.min():.3g} after step")
    mass = float(M.sum() * h)
    M = np.maximum(M, 0.0)
    return M / (M.sum() * h), mass


def swarm_reward(M, action, params: SwarmParams) -> float:
    M = np.asarray(M, dtype=float)
    a = np.asarray(action, dtype=float)
    f = -0.5 * a**2 + swarm_phi(params.x) - np.log(np.maximum(M, params.density_floor))
    return float(np.sum(M * f) * params.h)


def swarm_step(M, action, noise: float = 0.0, params: SwarmParams = SwarmParams()) -> TransitionResult:
    a = np.asarray(action, dtype=float)
    if not np.all(np.isfinite(a)):
        raise BadActionRange("swarm velocities must be finite")
    nxt, _ = swarm_advance(M, a + noise, params)
    return TransitionResult(nxt, swarm_reward(M, a, params))


def swarm_optimal_control(params: SwarmParams) -> np.ndarray:
    """Closed-form stationary velocity ``2 pi cos(2 pi x)`` on the grid."""
    return 2 * np.pi * np.cos(2 * np.pi * params.x)


def swarm_stationary_density(params: SwarmParams) -> np.ndarray:
    """``exp(2 sin(2 pi x)) / Z`` on the grid, normalized to unit discrete mass."""
    m = np.exp(2 * np.sin(2 * np.pi * params.x))
    return m / (m.sum() * params.h)


def periodic_gaussian(params: SwarmParams, mean: float, std: float) -> np.ndarray:
    x = params.x
    m = sum(np.exp(-0.5 * ((x - mean + k) / std) ** 2) for k in (-2, -1, 0, 1, 2))
    return m / (m.sum() * params.h)


class SwarmEnv(MeanFieldEnv):
    kind = "swarm"

    def __init__(self, params: SwarmParams | None = None):
        self.params = params or SwarmParams()
        self.noise_std = self.params.noise_std
        self.state_dim = self.action_dim = self.params.n_points
        b = self.params.action_bound
        self.action_box = (-b, b)

    def noise_from_normal(self, z: float) -> float:
        return float(self.noise_std * z)

    def step(self, M, action, noise: float | None = None) -> TransitionResult:
        return swarm_step(M, action, 0.0 if noise is None else noise, self.params)

    def reward(self, M, action) -> float:
        return swarm_reward(M, action, self.params)

    def sample_initial(self, rng: np.random.Generator) -> np.ndarray:
        """Wrapped Gaussian with random center and random width."""
        return periodic_gaussian(self.params, rng.uniform(0.0, 1.0), rng.uniform(0.05, 0.25))


# --------------------------------------------------------------------------
# synthetic logistic model
# --------------------------------------------------------------------------


def _default_logits():
    # [action, from, to]; action 0 favours staying, action 1 favours moving
    return (((1.0, -1.0), (-1.0, 1.0)), ((-1.0, 1.5), (1.5, -1.0)))


@dataclass(frozen=True)
class LogisticParams:
    """Softmax transition model on ``n`` states.

    A player in state ``x`` using action ``a`` moves to ``x'`` with
    probability proportional to ``exp(logits[a, x, x'] - crowd * mu[x'])``.
    The individual reward is ``bonus[x] - action_cost[a] - crowd_cost * mu[x]``.
    """

    logits: tuple = field(default_factory=_default_logits)
    crowd: float = 2.0
    bonus: tuple = (1.0, 0.3)
    action_cost: tuple = (0.0, 0.15)
    crowd_cost: float = 1.0
    noise_std: float = 0.0

    def __post_init__(self):
        L = np.asarray(self.logits, dtype=float)
        if L.ndim != 3 or L.shape[1] != L.shape[2]:
            raise ValueError("logits must have shape (n_actions, n_states, n_states)")
        if len(self.bonus) != L.shape[1] or len(self.action_cost) != L.shape[0]:
            raise DimensionMismatch("bonus / action_cost do not match logits")


class LogisticEnv(MeanFieldEnv):
    kind = "logistic"
    finite = True

    def __init__(self, params: LogisticParams | None = None):
        self.params = params or LogisticParams()
        self._logits = np.asarray(self.params.logits, dtype=float)
        self._bonus = np.asarray(self.params.bonus, dtype=float)
        self._cost = np.asarray(self.params.action_cost, dtype=float)
        self.n_actions, self.n_states, _ = self._logits.shape
        self.state_dim = self.action_dim = self.n_states
        self.action_box = (0, self.n_actions - 1)
        self.noise_std = self.params.noise_std

    def noise_from_normal(self, z: float) -> float:
        return float(self.noise_std * z)

    def kernel(self, mu, action, noise: float = 0.0) -> np.ndarray:
        """Column-stochastic matrix ``P[x', x]``."""
        a = self._check(action)
        z = self._logits[a, np.arange(self.n_states), :] - self.params.crowd * np.asarray(mu)[None, :]
        z[:, 0] += noise
        z -= z.max(axis=1, keepdims=True)
        p = np.exp(z)
        p /= p.sum(axis=1, keepdims=True)
        return p.T

    def _check(self, action) -> np.ndarray:
        a = np.asarray(action)
        if a.shape != (self.n_states,):
            raise DimensionMismatch(f"action profile must have {self.n_states} entries")
        if not np.issubdtype(a.dtype, np.integer):
            if np.any(a != np.round(a)):
                raise BadActionRange("logistic actions are integer indices")
            a = a.astype(int)
        if np.any(a < 0) or np.any(a >= self.n_actions):
            raise BadActionRange(f"action indices must lie in [0, {self.n_actions})")
        return a

    def step(self, mu, action, noise: float | None = None) -> TransitionResult:
        mu = np.asarray(mu, dtype=float)
        if mu.shape != (self.n_states,):
            raise DimensionMismatch(f"state must have {self.n_states} entries")
        nxt = self.kernel(mu, action, 0.0 if noise is None else noise) @ mu
        return TransitionResult(nxt / nxt.sum(), self.reward(mu, action))

    def reward(self, mu, action) -> float:
        mu = np.asarray(mu, dtype=float)
        a = self._check(action)
        return float(np.sum(mu * (self._bonus - self._cost[a] - self.params.crowd_cost * mu)))

    def reward_bound(self) -> float:
        return float(np.max(np.abs(self._bonus)) + np.max(np.abs(self._cost)) + abs(self.params.crowd_cost))

    def sample_initial(self, rng: np.random.Generator) -> np.ndarray:
        return rng.dirichlet(np.ones(self.n_states))


def make_env(kind: str, **params) -> MeanFieldEnv:
    if kind == "cyber":
        return CyberEnv(CyberParams(**params))
    if kind == "swarm":
        return SwarmEnv(SwarmParams(**params))
    if kind == "logistic":
        return LogisticEnv(LogisticParams(**params))
    raise ValueError(f"unknown environment kind {kind!r}")
