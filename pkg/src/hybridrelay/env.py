"""Episodic relay-control environment: state encoding, action decoding and energy dynamics."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import StructuralError
from .network import (ChannelRealization, PathLossModel, Topology, enhance_channels,
                      generate_channels, relay_config)
from .phy import T_MIN, HybridAction, LinkBudget, harvested_energy, power_budgets, throughput


@dataclass(frozen=True)
class EnvConfig:
    topology: Topology = field(default_factory=Topology)
    path_loss: PathLossModel = field(default_factory=PathLossModel)
    budget: LinkBudget = field(default_factory=LinkBudget)
    gamma_max: float = 0.5
    e_max: float = 10.0
    e_init: float = 0.0
    p_c: float = 1e-3  # passive standby cost per slot
    episode_length: int = 100
    t_min: float = T_MIN

    @property
    def K(self) -> int:
        return self.topology.antennas

    @property
    def N(self) -> int:
        return self.topology.n_relays

    @property
    def action_dim(self) -> int:
        return 1 + 4 * self.K + self.N

    @property
    def state_dim(self) -> int:
        K, N = self.K, self.N
        return 2 * K + 2 * K * N + 2 * N + N * (N - 1) + N


@dataclass(frozen=True)
class EnvState:
    channels: ChannelRealization
    energy: np.ndarray
    epoch: int = 0


@dataclass(frozen=True)
class StepOutcome:
    reward: float
    next_state: EnvState
    harvested: np.ndarray
    spent: np.ndarray
    powers: np.ndarray  # transmit power of each active relay
    done: bool


def _ri(x) -> np.ndarray:
    x = np.asarray(x).ravel()
    return np.concatenate([x.real, x.imag])


class RelayEnv:
    def __init__(self, config: EnvConfig | None = None):
        self.config = config or EnvConfig()
        self.seed = (0,)
        iu = np.triu_indices(self.config.N, 1)
        self._iu = iu

    def _channels(self, epoch: int) -> ChannelRealization:
        return generate_channels(self.config.topology, self.config.path_loss, (*self.seed, epoch))

    def reset(self, seed) -> EnvState:
        """``seed`` is an int or a tuple such as (run seed, episode)."""
        self.seed = tuple(int(v) for v in np.atleast_1d(seed))
        e = np.full(self.config.N, float(self.config.e_init))
        return EnvState(self._channels(0), np.clip(e, 0.0, self.config.e_max), 0)

    def powers(self, state: EnvState, action: HybridAction) -> tuple[np.ndarray, np.ndarray]:
        """Active-relay powers min(budget, available / t) and every relay's harvest."""
        cfg = self.config
        enh = enhance_channels(state.channels, relay_config(action.modes, action.phases, cfg.gamma_max))
        h = harvested_energy(enh, action.w0, action.t, cfg.budget)
        cap = power_budgets(enh, action.w0, action.t, cfg.budget)
        avail = (state.energy + h)[enh.active] / action.t
        return np.minimum(cap, avail), h

    def evaluate(self, state: EnvState, action: HybridAction) -> float:
        """Reward the action would earn in ``state`` (no transition)."""
        self._check(action)
        cfg = self.config
        enh = enhance_channels(state.channels, relay_config(action.modes, action.phases, cfg.gamma_max))
        p, _ = self.powers(state, action)
        return throughput(enh, action.with_powers(p), cfg.budget)

    def _check(self, action: HybridAction) -> None:
        N, K = self.config.N, self.config.K
        if np.asarray(action.modes).shape != (N,) or action.w0.shape != (K,) or action.w1.shape != (K,):
            raise StructuralError("action does not match the network dimensions")

    def step(self, state: EnvState, action: HybridAction) -> StepOutcome:
        self._check(action)
        cfg = self.config
        enh = enhance_channels(state.channels, relay_config(action.modes, action.phases, cfg.gamma_max))
        p, h = self.powers(state, action)
        reward = throughput(enh, action.with_powers(p), cfg.budget)
        spent = np.where(np.asarray(action.modes) == 1, cfg.p_c, 0.0)
        spent[enh.active] = p * action.t
        energy = np.clip(state.energy + h - spent, 0.0, cfg.e_max)
        nxt = state.epoch + 1
        return StepOutcome(reward, EnvState(self._channels(nxt), energy, nxt), h, spent, p,
                           nxt >= cfg.episode_length)

    # -- encodings -------------------------------------------------------
    def encode_state(self, state: EnvState) -> np.ndarray:
        """[f0, f_1..f_N, g, upper-triangular z] as Re/Im blocks, then e / E_max."""
        ch = state.channels
        return np.concatenate([_ri(ch.f0), _ri(ch.f), _ri(ch.g), _ri(ch.z[self._iu]),
                               np.asarray(state.energy) / self.config.e_max])

    def feature_scale(self) -> np.ndarray:
        """Per-feature RMS of the channel entries under the path-loss model (1 for energies).

        Dividing features by this gives network inputs of order one.
        """
        cfg = self.config
        top, pl = cfg.topology, cfg.path_loss
        hap = 1.0 / np.sqrt(pl.noise_mw)
        le = 10.0 ** (-pl.direct_extra_attenuation_db / 10.0)
        K, N = cfg.K, cfg.N

        def rms(a, b, extra=1.0):
            return np.sqrt(extra * pl.gain(np.hypot(a[0] - b[0], a[1] - b[1])) / 2.0)

        f0 = np.full(K, hap * rms(top.hap, top.receiver, le))
        f = np.repeat([hap * rms(top.hap, r) for r in top.relays], K)
        g = np.array([rms(r, top.receiver) for r in top.relays])
        z = np.array([rms(top.relays[i], top.relays[j]) for i, j in zip(*self._iu)])
        return np.concatenate([f0, f0, f, f, g, g, z, z, np.ones(N)])

    def decode_state(self, features) -> tuple[ChannelRealization, np.ndarray]:
        """Inverse of :meth:`encode_state` (the epoch index is not encoded)."""
        K, N = self.config.K, self.config.N
        x = np.asarray(features, dtype=float)
        if x.shape != (self.config.state_dim,):
            raise StructuralError(f"expected {self.config.state_dim} features, got {x.shape}")
        pos = 0

        def take(n):
            nonlocal pos
            v = x[pos:pos + 2 * n]
            pos += 2 * n
            return v[:n] + 1j * v[n:]

        f0 = take(K)
        f = take(K * N).reshape(N, K)
        g = take(N)
        zu = take(N * (N - 1) // 2)
        z = np.zeros((N, N), dtype=np.complex128)
        z[self._iu] = zu
        z = z + z.T
        return ChannelRealization(f0, f, g, z), x[pos:] * self.config.e_max

    def decode_action(self, raw, modes) -> HybridAction:
        cfg = self.config
        K, N = cfg.K, cfg.N
        raw = np.asarray(raw, dtype=float)
        if raw.shape != (cfg.action_dim,):
            raise StructuralError(f"raw action must have length {cfg.action_dim}, got {raw.shape}")
        t = cfg.t_min + (0.5 - 2 * cfg.t_min) / (1.0 + np.exp(-raw[0]))
        ws = []
        for i in range(2):
            blk = raw[1 + 2 * K * i:1 + 2 * K * (i + 1)]
            w = blk[:K] + 1j * blk[K:]
            nrm = np.linalg.norm(w)
            if nrm == 0:
                w = np.zeros(K, dtype=np.complex128)
                w[0] = 1.0
            else:
                w = w / nrm
            ws.append(w)
        theta = np.pi * (np.tanh(raw[1 + 4 * K:]) + 1.0)
        modes = np.asarray(modes, dtype=np.int64)
        if modes.shape != (N,):
            raise StructuralError(f"need {N} modes")
        return HybridAction(float(t), ws[0], ws[1], modes, theta)

    def encode_action(self, action: HybridAction, clip: float = 15.0) -> np.ndarray:
        """Raw vector that decodes back to ``action`` (up to saturation at the ends)."""
        cfg = self.config
        frac = (action.t - cfg.t_min) / (0.5 - 2 * cfg.t_min)
        frac = np.clip(frac, 1.0 / (1.0 + np.exp(clip)), 1.0 / (1.0 + np.exp(-clip)))
        t_raw = np.log(frac / (1.0 - frac))
        u = np.clip(np.asarray(action.phases) / np.pi - 1.0, -np.tanh(clip), np.tanh(clip))
        return np.concatenate([[t_raw], _ri(action.w0), _ri(action.w1), np.arctanh(u)])
