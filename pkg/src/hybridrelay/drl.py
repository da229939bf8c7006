"""Two-level agent: a DQN picks relay modes per episode, DDPG drives the continuous controls.

The optimizer-assisted variants ask a model-based solver for an alternative
action each epoch and keep it when it earns more than the actor's candidate.
"""
from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .env import EnvState, RelayEnv
from .errors import SolverError
from .network import cophase_passive, enhance_channels, relay_config
from .neural import AdamState, Mlp, adam_step, backward, blend, forward
from .phy import HybridAction
from .polyblock import solve_fixed_t, solve_lower_bound

MODES = ("model_free", "simplified", "full_opt")


@dataclass(frozen=True)
class TransitionSample:
    state: np.ndarray
    modes: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    done: bool
    optimizer_target: float | None = None

    @property
    def optimizer_flag(self) -> bool:
        return self.optimizer_target is not None


class ReplayBuffer:
    """FIFO store with uniform sampling without replacement."""

    def __init__(self, capacity: int, seed: int = 0):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._items: deque = deque(maxlen=capacity)
        self.rng = np.random.default_rng(seed)

    def __len__(self) -> int:
        return len(self._items)

    def push(self, item) -> None:
        self._items.append(item)

    def sample(self, n: int) -> list:
        n = min(n, len(self._items))
        idx = self.rng.choice(len(self._items), size=n, replace=False)
        return [self._items[i] for i in idx]

    def __iter__(self):
        return iter(self._items)


@dataclass(frozen=True)
class AgentConfig:
    gamma: float = 0.9
    hidden: int = 128
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    dqn_lr: float = 1e-3
    tau: float = 0.005
    dqn_sync_every: int = 100
    sigma0: float = 0.3
    sigma_decay: float = 0.995
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_episodes: int = 200
    batch_size: int = 64
    ddpg_capacity: int = 10000
    dqn_capacity: int = 1000
    dqn_batch_size: int = 32
    last_m: int = 20
    action_clip: float = 5.0
    lb_eps: float = 1e-2

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        if self.sigma0 < 0 or not 0 <= self.eps_end <= self.eps_start <= 1:
            raise ValueError("bad exploration schedule")

    def sigma(self, episode: int) -> float:
        return self.sigma0 * self.sigma_decay ** episode

    def epsilon(self, episode: int) -> float:
        frac = min(1.0, episode / max(1, self.eps_episodes))
        return self.eps_start + (self.eps_end - self.eps_start) * frac


@dataclass
class Agents:
    actor: Mlp
    critic: Mlp
    actor_target: Mlp
    critic_target: Mlp
    q_net: Mlp
    q_target: Mlp
    actor_opt: AdamState
    critic_opt: AdamState
    q_opt: AdamState
    ddpg_buffer: ReplayBuffer
    dqn_buffer: ReplayBuffer
    rng: np.random.Generator
    dqn_steps: int = 0

    @classmethod
    def build(cls, env: RelayEnv, cfg: AgentConfig, seed: int) -> "Agents":
        rng = np.random.default_rng([seed, 1])
        s, a, N, h = env.config.state_dim, env.config.action_dim, env.config.N, cfg.hidden
        actor = Mlp.build([s + N, h, h, a], rng=rng)
        critic = Mlp.build([s + N + a, h, h, 1], rng=rng)
        q = Mlp.build([s, h, h, 2 ** N], rng=rng)
        return cls(actor, critic, actor.copy(), critic.copy(), q, q.copy(),
                   AdamState.for_net(actor, cfg.actor_lr), AdamState.for_net(critic, cfg.critic_lr),
                   AdamState.for_net(q, cfg.dqn_lr),
                   ReplayBuffer(cfg.ddpg_capacity, seed=seed * 7 + 2),
                   ReplayBuffer(cfg.dqn_capacity, seed=seed * 7 + 3),
                   np.random.default_rng([seed, 4]))

    def networks(self) -> dict:
        return {"actor": self.actor, "critic": self.critic, "actor_target": self.actor_target,
                "critic_target": self.critic_target, "q_net": self.q_net, "q_target": self.q_target,
                "actor_opt": self.actor_opt, "critic_opt": self.critic_opt, "q_opt": self.q_opt}


def mode_vector(index: int, n: int) -> np.ndarray:
    """Little-endian: relay k takes bit k of ``index``."""
    return np.array([(index >> k) & 1 for k in range(n)], dtype=np.int64)


def mode_index(modes) -> int:
    return int(sum(int(b) << k for k, b in enumerate(modes)))


def dqn_select_modes(q_net: Mlp, features, eps: float, rng: np.random.Generator) -> np.ndarray:
    """Epsilon-greedy over all 2^N mode vectors; ties go to the lowest index."""
    n_out = q_net.out_dim
    n = n_out.bit_length() - 1
    if rng.random() < eps:
        return mode_vector(int(rng.integers(n_out)), n)
    return mode_vector(int(np.argmax(q_net(features))), n)


def ddpg_act(actor: Mlp, features, sigma: float, rng: np.random.Generator) -> np.ndarray:
    a = actor(features)
    if sigma > 0:
        a = a + sigma * rng.standard_normal(a.shape)
    return a


def actor_input(x, modes) -> np.ndarray:
    return np.concatenate([x, np.asarray(modes, dtype=float)])


@dataclass
class Proposal:
    action: HybridAction
    raw: np.ndarray
    reward: float


def optimized_proposal(env: RelayEnv, state: EnvState, modes, variant: str, t_hint: float | None = None,
                       lb_eps: float = 1e-2, clip: float = 5.0) -> Proposal | None:
    """Model-based action for the given modes, or None if the solver fails.

    Passive relays are co-phased; the beamformers (and t for ``full_opt``) come
    from the lower-bound solver. The proposal is passed through the raw action
    encoding so that its reward is exactly what executing the stored raw vector
    earns.
    """
    cfg = env.config
    modes = np.asarray(modes, dtype=np.int64)
    ch = state.channels
    theta = cophase_passive(ch, modes, cfg.gamma_max) if modes.any() else np.zeros(cfg.N)
    enh = enhance_channels(ch, relay_config(modes, theta, cfg.gamma_max))
    try:
        if variant == "full_opt":
            lb = solve_lower_bound(enh, cfg.budget, eps=lb_eps)
            t, w0, w1 = lb.t_opt, lb.w0_opt, lb.w1_opt
        elif variant == "simplified":
            t = float(np.clip(t_hint if t_hint is not None else 0.25, cfg.t_min, 0.5 - cfg.t_min))
            _, w0, w1 = solve_fixed_t(enh, cfg.budget, t=t)
        else:
            raise ValueError(f"unknown optimizer variant {variant!r}")
    except SolverError:
        return None
    t = float(np.clip(t, cfg.t_min, 0.5))
    raw = np.clip(env.encode_action(HybridAction(t, w0, w1, modes, theta)), -clip, clip)
    action = env.decode_action(raw, modes)
    return Proposal(action, raw, env.evaluate(state, action))


def merge_targets(y_t: float, y_opt: float | None, a_c, a_o):
    """(executed action, override target). Strictly better optimizer values win."""
    if y_opt is not None and y_opt > y_t:
        return a_o, y_opt
    return a_c, None


@dataclass
class Losses:
    critic: float
    actor: float


def _critic_in(states, modes, actions):
    return np.hstack([states, modes, actions])


def critic_targets(agents: Agents, batch: list[TransitionSample], gamma: float) -> np.ndarray:
    S2 = np.array([b.next_state for b in batch])
    B = np.array([b.modes for b in batch], dtype=float)
    A2 = agents.actor_target(np.hstack([S2, B]))
    q2 = agents.critic_target(_critic_in(S2, B, A2))[:, 0]
    alive = np.array([0.0 if b.done else 1.0 for b in batch])
    r = np.array([b.reward for b in batch])
    boot = r + gamma * alive * q2
    opt = np.array([b.optimizer_target if b.optimizer_flag else -np.inf for b in batch])
    return np.maximum(boot, opt + gamma * alive * q2)


def ddpg_train_step(agents: Agents, batch: list[TransitionSample], cfg: AgentConfig) -> Losses:
    if not batch:
        raise ValueError("empty batch")
    y = critic_targets(agents, batch, cfg.gamma)
    S = np.array([b.state for b in batch])
    B = np.array([b.modes for b in batch], dtype=float)
    A = np.array([b.action for b in batch])
    n = len(batch)
    q, cache = forward(agents.critic, _critic_in(S, B, A))
    err = q[:, 0] - y
    g = backward(agents.critic, cache, (2.0 / n) * err[:, None])
    adam_step(agents.critic, g.params, agents.critic_opt)
    # actor: ascend mean Q(s, pi(s)) through the updated critic
    a_pi, a_cache = forward(agents.actor, np.hstack([S, B]))
    q_pi, c_cache = forward(agents.critic, _critic_in(S, B, a_pi))
    gin = backward(agents.critic, c_cache, np.full((n, 1), -1.0 / n)).x
    ga = backward(agents.actor, a_cache, gin[:, -a_pi.shape[1]:])
    adam_step(agents.actor, ga.params, agents.actor_opt)
    blend(agents.critic_target, agents.critic, cfg.tau)
    blend(agents.actor_target, agents.actor, cfg.tau)
    return Losses(float(np.mean(err ** 2)), float(-np.mean(q_pi)))


def actor_objective_grad(actor: Mlp, critic: Mlp, S, B) -> tuple[float, list[np.ndarray]]:
    """mean Q(s, pi(s)) and its gradient with respect to the actor parameters."""
    n = S.shape[0]
    a, ac = forward(actor, np.hstack([S, B]))
    q, cc = forward(critic, _critic_in(S, B, a))
    gin = backward(critic, cc, np.full((n, 1), 1.0 / n)).x
    return float(q.mean()), backward(actor, ac, gin[:, -a.shape[1]:]).params


def dqn_train_step(agents: Agents, batch: list[TransitionSample], cfg: AgentConfig) -> float:
    """One TD step on the mode-selection network; hard target sync on schedule."""
    if not batch:
        raise ValueError("empty batch")
    S = np.array([b.state for b in batch])
    S2 = np.array([b.next_state for b in batch])
    idx = np.array([mode_index(b.modes) for b in batch])
    alive = np.array([0.0 if b.done else 1.0 for b in batch])
    y = np.array([b.reward for b in batch]) + cfg.gamma * alive * agents.q_target(S2).max(axis=1)
    q, cache = forward(agents.q_net, S)
    n = len(batch)
    err = q[np.arange(n), idx] - y
    gout = np.zeros_like(q)
    gout[np.arange(n), idx] = (2.0 / n) * err
    adam_step(agents.q_net, backward(agents.q_net, cache, gout).params, agents.q_opt)
    agents.dqn_steps += 1
    if agents.dqn_steps % cfg.dqn_sync_every == 0:
        blend(agents.q_target, agents.q_net, 1.0)
    return float(np.mean(err ** 2))


@dataclass
class EpisodeRecord:
    episode: int
    modes: np.ndarray
    rewards: list[float] = field(default_factory=list)
    overrides: int = 0
    critic_losses: list[float] = field(default_factory=list)
    actor_losses: list[float] = field(default_factory=list)
    dqn_loss: float | None = None
    runtime_s: float = 0.0

    @property
    def override_rate(self) -> float:
        return self.overrides / max(1, len(self.rewards))

    @property
    def reward_mean(self) -> float:
        return float(np.mean(self.rewards)) if self.rewards else 0.0

    @property
    def reward_std(self) -> float:
        return float(np.std(self.rewards)) if self.rewards else 0.0


def run_episode(env: RelayEnv, agents: Agents, cfg: AgentConfig, mode: str, seed: int,
                episode: int) -> EpisodeRecord:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    t0 = time.perf_counter()
    scale = env.feature_scale()
    state = env.reset((seed, episode))
    x0 = env.encode_state(state) / scale
    modes = dqn_select_modes(agents.q_net, x0, cfg.epsilon(episode), agents.rng)
    rec = EpisodeRecord(episode, modes)
    sigma = cfg.sigma(episode)
    x = x0
    for _ in range(env.config.episode_length):
        raw = np.clip(ddpg_act(agents.actor, actor_input(x, modes), sigma, agents.rng),
                      -cfg.action_clip, cfg.action_clip)
        a_c = env.decode_action(raw, modes)
        override = None
        if mode != "model_free":
            y_c = env.evaluate(state, a_c)
            prop = optimized_proposal(env, state, modes, mode, t_hint=a_c.t, lb_eps=cfg.lb_eps,
                                      clip=cfg.action_clip)
            if prop is not None:
                chosen, override = merge_targets(y_c, prop.reward, raw, prop.raw)
                raw = chosen
        out = env.step(state, env.decode_action(raw, modes))
        x_next = env.encode_state(out.next_state) / scale
        agents.ddpg_buffer.push(TransitionSample(x, modes, raw, out.reward, x_next, out.done, override))
        rec.rewards.append(out.reward)
        rec.overrides += override is not None
        if len(agents.ddpg_buffer) >= cfg.batch_size:
            loss = ddpg_train_step(agents, agents.ddpg_buffer.sample(cfg.batch_size), cfg)
            rec.critic_losses.append(loss.critic)
            rec.actor_losses.append(loss.actor)
        state, x = out.next_state, x_next
        if out.done:
            break
    r_dqn = float(np.mean(rec.rewards[-cfg.last_m:]))
    agents.dqn_buffer.push(TransitionSample(x0, modes, np.zeros(0), r_dqn, x, False))
    rec.dqn_loss = dqn_train_step(agents, agents.dqn_buffer.sample(cfg.dqn_batch_size), cfg)
    rec.runtime_s = time.perf_counter() - t0
    return rec


def train(env: RelayEnv, cfg: AgentConfig, mode: str, seed: int, episodes: int,
          agents: Agents | None = None, callback=None) -> tuple[Agents, list[EpisodeRecord]]:
    agents = agents or Agents.build(env, cfg, seed)
    records = []
    for ep in range(episodes):
        rec = run_episode(env, agents, cfg, mode, seed, ep)
        records.append(rec)
        if callback is not None:
            callback(rec)
    return agents, records
