"""Deep deterministic policy gradient on distribution states.

The state is the whole distribution vector (a histogram for the swarm model)
and the action is the vector of controls applied at every state, so both the
actor and the critic are small fully connected networks on fixed-size real
vectors.  The critic reads the concatenation ``[state, action]``.

One training step follows the textbook recipe: act with Gaussian exploration
noise, store the transition, sample a minibatch with replacement, regress the
critic on targets built from the target networks only, move the actor along
the critic's action gradient, then let both target networks track the live
ones with rate ``tau``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dp import evaluate_policy
from .envs import MeanFieldEnv
from .errors import BufferTooSmall, DimensionMismatch, NonFiniteLoss
from .neural import AdamState, MLPParams, adam_init, adam_update, init_mlp, mlp_backward, mlp_forward, soft_update

MAX_HIDDEN_WIDTH = 300
LOG_COLUMNS = ("episode", "mean_return", "critic_loss", "actor_objective", "wall_ms")


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray


class ReplayBuffer:
    """Fixed-capacity ring buffer of transitions stored as flat arrays."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.state_dim, self.action_dim = int(state_dim), int(action_dim)
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.size = 0
        self._next = 0

    def __len__(self) -> int:
        return self.size

    def clear(self) -> None:
        self.size = 0
        self._next = 0

    def push(self, t: Transition) -> None:
        s, a, s2 = (np.asarray(v, dtype=float) for v in (t.state, t.action, t.next_state))
        if s.shape != (self.state_dim,) or s2.shape != (self.state_dim,) or a.shape != (self.action_dim,):
            raise DimensionMismatch(
                f"transition shapes {s.shape}, {a.shape}, {s2.shape} do not match buffer dims "
                f"({self.state_dim}, {self.action_dim})"
            )
        i = self._next
        self.states[i], self.actions[i], self.rewards[i], self.next_states[i] = s, a, float(t.reward), s2
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def _slot(self, k: int) -> int:
        # k-th oldest stored transition
        start = self._next - self.size
        return (start + k) % self.capacity

    def get(self, k: int) -> Transition:
        if not 0 <= k < self.size:
            raise IndexError(k)
        i = self._slot(k)
        return Transition(self.states[i].copy(), self.actions[i].copy(), float(self.rewards[i]), self.next_states[i].copy())

    def sample_indices(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """``n`` uniform draws with replacement, as ages (0 = oldest)."""
        if self.size < n or n < 1:
            raise BufferTooSmall(f"cannot sample {n} transitions from a buffer holding {self.size}")
        return rng.integers(0, self.size, size=n)

    def sample_arrays(self, n: int, rng: np.random.Generator):
        slots = np.array([self._slot(int(k)) for k in self.sample_indices(n, rng)])
        return self.states[slots], self.actions[slots], self.rewards[slots], self.next_states[slots]

    def sample(self, n: int, rng: np.random.Generator) -> list:
        return [self.get(int(k)) for k in self.sample_indices(n, rng)]


def buffer_push(buf: ReplayBuffer, transition: Transition) -> None:
    buf.push(transition)


def buffer_sample(buf: ReplayBuffer, n: int, rng: np.random.Generator) -> list:
    return buf.sample(n, rng)


@dataclass(frozen=True)
class DdpgConfig:
    """Training hyperparameters.

    ``action_noise_std`` defaults to the square root of the exploration
    variance 0.02.  Episode length and buffer capacity are free choices.
    ``reward_scale`` multiplies rewards before they reach the critic; it
    leaves the optimal policy unchanged and only conditions the regression.
    """

    n_episodes: int = 3000
    episode_length: int = 50
    minibatch: int = 16
    tau: float = 0.01
    gamma: float = 0.99
    action_noise_std: float = float(np.sqrt(0.02))
    actor_lr: float = 1e-4
    critic_lr: float = 1e-4
    buffer_capacity: int = 100_000
    buffer_reset_per_episode: bool = True
    hidden: tuple = (128, 128)
    reward_scale: float = 1.0
    updates_per_step: int = 1

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError(f"tau must lie in (0, 1], got {self.tau}")
        if self.minibatch < 1 or self.minibatch > self.buffer_capacity:
            raise ValueError("minibatch must be between 1 and the buffer capacity")
        if self.n_episodes < 1 or self.episode_length < 1:
            raise ValueError("n_episodes and episode_length must be positive")
        if self.action_noise_std < 0 or self.actor_lr <= 0 or self.critic_lr <= 0:
            raise ValueError("noise std must be nonnegative and learning rates positive")
        if len(self.hidden) != 2 or any(not 1 <= w <= MAX_HIDDEN_WIDTH for w in self.hidden):
            raise ValueError(f"need exactly two hidden layers of width 1..{MAX_HIDDEN_WIDTH}, got {self.hidden}")
        if self.reward_scale <= 0 or self.updates_per_step < 1:
            raise ValueError("reward_scale must be positive and updates_per_step at least 1")


@dataclass
class AgentState:
    """Live networks, their targets and the two optimizers."""

    actor: MLPParams
    critic: MLPParams
    actor_target: MLPParams
    critic_target: MLPParams
    actor_opt: AdamState
    critic_opt: AdamState


def actor_output_map(env: MeanFieldEnv) -> tuple[float, float]:
    """(scale, offset) sending ``tanh`` outputs onto the environment's action box."""
    lo, hi = env.action_box
    return 0.5 * (hi - lo), 0.5 * (hi + lo)


def init_agent(env: MeanFieldEnv, config: DdpgConfig, rng: np.random.Generator) -> AgentState:
    sd, ad = env.state_dim, env.action_dim
    scale, offset = actor_output_map(env)
    actor = init_mlp((sd, *config.hidden, ad), rng, output="tanh", out_scale=scale, out_offset=offset)
    critic = init_mlp((sd + ad, *config.hidden, 1), rng)
    return AgentState(
        actor,
        critic,
        actor.copy(),
        critic.copy(),
        adam_init(actor, config.actor_lr),
        adam_init(critic, config.critic_lr),
    )


def critic_targets(rewards, next_states, actor_target: MLPParams, critic_target: MLPParams, gamma: float) -> np.ndarray:
    """``y = r + gamma Q'(s', pi'(s'))`` using the target networks only."""
    next_actions = mlp_forward(actor_target, next_states)
    q_next = mlp_forward(critic_target, np.hstack([next_states, next_actions]))[:, 0]
    return np.asarray(rewards, dtype=float) + gamma * q_next


def ddpg_update(agent: AgentState, batch, config: DdpgConfig) -> tuple[AgentState, float, float]:
    """One critic step, one actor step and the soft target updates.

    ``batch`` is ``(states, actions, rewards, next_states)`` as arrays.  Returns
    the new agent plus the critic loss and the actor objective measured before
    the respective steps.  The input agent is not modified.
    """
    states, actions, rewards, next_states = batch
    n = states.shape[0]
    y = critic_targets(rewards, next_states, agent.actor_target, agent.critic_target, config.gamma)

    sa = np.hstack([states, actions])
    q = mlp_forward(agent.critic, sa)[:, 0]
    diff = q - y
    critic_loss = float(np.mean(diff**2))
    if not np.isfinite(critic_loss):
        raise NonFiniteLoss(f"critic loss is {critic_loss}")
    c_grads, _ = mlp_backward(agent.critic, sa, (2.0 / n) * diff[:, None])
    critic, critic_opt = adam_update(agent.critic, c_grads, agent.critic_opt)

    # actor ascent on mean Q(s, pi(s)), done as descent on its negative
    pi = mlp_forward(agent.actor, states)
    s_pi = np.hstack([states, pi])
    actor_obj = float(np.mean(mlp_forward(critic, s_pi)))
    _, dq_dinput = mlp_backward(critic, s_pi, np.full((n, 1), 1.0 / n))
    dq_da = dq_dinput[:, states.shape[1] :]
    a_grads, _ = mlp_backward(agent.actor, states, -dq_da)
    actor, actor_opt = adam_update(agent.actor, a_grads, agent.actor_opt)

    new = AgentState(
        actor,
        critic,
        soft_update(agent.actor_target, actor, config.tau),
        soft_update(agent.critic_target, critic, config.tau),
        actor_opt,
        critic_opt,
    )
    return new, critic_loss, actor_obj


@dataclass
class TrainingLog:
    rows: list = field(default_factory=list)

    def append(self, episode, mean_return, critic_loss, actor_objective, wall_ms):
        self.rows.append((int(episode), float(mean_return), float(critic_loss), float(actor_objective), float(wall_ms)))

    @property
    def returns(self) -> np.ndarray:
        return np.array([r[1] for r in self.rows])


def ddpg_train(
    env: MeanFieldEnv,
    config: DdpgConfig,
    rng: np.random.Generator,
    *,
    initial_sampler: Callable[[np.random.Generator], np.ndarray] | None = None,
    callback: Callable[[int, AgentState], None] | None = None,
    agent: AgentState | None = None,
) -> tuple[MLPParams, MLPParams, TrainingLog]:
    """Train an actor and a critic on ``env``.

    Every episode starts from a fresh draw of ``initial_sampler`` (the
    environment's own sampler by default).  The logged ``mean_return`` is the
    discounted return collected along the noisy training episode; critic loss
    and actor objective are averaged over the episode's updates (nan when the
    buffer never held a full minibatch).  ``callback(episode, agent)`` runs
    after each episode, for checkpoints and snapshots.
    """
    if initial_sampler is None:
        initial_sampler = env.sample_initial
    if agent is None:
        agent = init_agent(env, config, rng)
    if agent.actor.sizes[0] != env.state_dim or agent.actor.sizes[-1] != env.action_dim:
        raise DimensionMismatch("actor dimensions do not match the environment")
    lo, hi = env.action_box
    buf = ReplayBuffer(config.buffer_capacity, env.state_dim, env.action_dim)
    log = TrainingLog()
    for episode in range(1, config.n_episodes + 1):
        t0 = time.perf_counter()
        if config.buffer_reset_per_episode:
            buf.clear()
        state = np.asarray(initial_sampler(rng), dtype=float)
        ret, disc = 0.0, 1.0
        losses, objectives = [], []
        for step in range(config.episode_length):
            raw = mlp_forward(agent.actor, state) + config.action_noise_std * rng.standard_normal(env.action_dim)
            noise = env.sample_noise(rng) if not env.deterministic else env.neutral_noise
            res = env.step(state, np.clip(raw, lo, hi), noise)
            buf.push(Transition(state, raw, config.reward_scale * res.reward, res.next_state))
            ret += disc * res.reward
            disc *= config.gamma
            state = res.next_state
            if len(buf) >= config.minibatch:
                for _ in range(config.updates_per_step):
                    try:
                        agent, loss, obj = ddpg_update(agent, buf.sample_arrays(config.minibatch, rng), config)
                    except NonFiniteLoss as exc:
                        raise NonFiniteLoss(f"episode {episode}, step {step}: {exc}") from exc
                    losses.append(loss)
                    objectives.append(obj)
        wall_ms = 1000.0 * (time.perf_counter() - t0)
        log.append(
            episode,
            ret,
            np.mean(losses) if losses else np.nan,
            np.mean(objectives) if objectives else np.nan,
            wall_ms,
        )
        if callback is not None:
            callback(episode, agent)
    return agent.actor, agent.critic, log


def actor_policy(env: MeanFieldEnv, actor: MLPParams) -> Callable[[np.ndarray], np.ndarray]:
    lo, hi = env.action_box
    return lambda state: np.clip(mlp_forward(actor, state), lo, hi)


def evaluate_actor(env: MeanFieldEnv, actor: MLPParams, mu0, gamma: float, horizon: int) -> float:
    """Noise-free discounted return of the actor's feedback control from ``mu0``."""
    return evaluate_policy(env, actor_policy(env, actor), mu0, gamma, horizon).mean


def rollout(env: MeanFieldEnv, policy: Callable[[np.ndarray], np.ndarray], mu0, n_steps: int):
    """Noise-free trajectory: states ``(n_steps + 1, d)``, actions and rewards per step."""
    states = [np.asarray(mu0, dtype=float)]
    actions, rewards = [], []
    for _ in range(n_steps):
        a = np.asarray(policy(states[-1]), dtype=float)
        res = env.step(states[-1], a, env.neutral_noise)
        actions.append(a)
        rewards.append(res.reward)
        states.append(res.next_state)
    return np.array(states), np.array(actions), np.array(rewards)
