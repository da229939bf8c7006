"""Topology, path loss, block-fading channel draws and backscatter enhancement.

Unit system: channels leaving the HAP (``f0`` and ``f``) are divided by the
noise standard deviation, so ``p_t * |f^H w|^2`` is an SNR when ``p_t`` is in mW.
Relay-originated channels (``g`` and ``z``) keep their raw path gain: relay
transmit powers and harvested energies are then expressed in noise units, and
the reflected cascade ``g_k * Gamma_k * f_k`` is normalized exactly once.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, StructuralError
from .numerics import hdot

DEFAULT_RELAYS = ((4.0, 1.0), (4.0, -1.0), (5.0, 0.0), (6.0, 1.0), (6.0, -1.0))


@dataclass(frozen=True)
class Topology:
    hap: tuple[float, float] = (0.0, 0.0)
    receiver: tuple[float, float] = (10.0, 0.0)
    relays: tuple[tuple[float, float], ...] = DEFAULT_RELAYS
    antennas: int = 3

    def __post_init__(self):
        if self.antennas < 1:
            raise StructuralError("need at least one HAP antenna")
        pts = [self.hap, self.receiver, *self.relays]
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                if np.hypot(pts[i][0] - pts[j][0], pts[i][1] - pts[j][1]) <= 0:
                    raise StructuralError(f"nodes {i} and {j} coincide")

    @property
    def n_relays(self) -> int:
        return len(self.relays)

    def with_relays(self, n: int) -> "Topology":
        """Keep the first ``n`` relays."""
        return Topology(self.hap, self.receiver, tuple(self.relays[:n]), self.antennas)


def _dist(a, b) -> float:
    return float(np.hypot(a[0] - b[0], a[1] - b[1]))


@dataclass(frozen=True)
class PathLossModel:
    unit_loss_db: float = 25.0
    exponent: float = 2.0
    noise_dbm: float = -80.0
    direct_extra_attenuation_db: float = 0.0

    def __post_init__(self):
        if self.exponent <= 0 or self.unit_loss_db < 0:
            raise StructuralError("path-loss exponent must be > 0 and unit loss >= 0")

    def gain(self, d: float) -> float:
        """Linear power gain at distance d (meters)."""
        return 10.0 ** (-self.unit_loss_db / 10.0) * d ** (-self.exponent)

    @property
    def noise_mw(self) -> float:
        return 10.0 ** (self.noise_dbm / 10.0)


@dataclass(frozen=True)
class ChannelRealization:
    f0: np.ndarray  # (K,)   HAP -> receiver
    f: np.ndarray  # (N, K) HAP -> relay n
    g: np.ndarray  # (N,)   relay n -> receiver
    z: np.ndarray  # (N, N) relay <-> relay, symmetric, zero diagonal

    @property
    def K(self) -> int:
        return self.f0.shape[0]

    @property
    def N(self) -> int:
        return self.g.shape[0]


def _cn(rng: np.random.Generator, size) -> np.ndarray:
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2.0)


def generate_channels(topology: Topology, path_loss: PathLossModel, seed) -> ChannelRealization:
    """Draw one block-fading realization.

    Every link has its own random stream keyed by (seed, link), so dropping
    relays from the topology leaves the remaining links untouched. ``seed`` is
    an int or a tuple of ints (e.g. (run seed, epoch)).
    """
    K, N = topology.antennas, topology.n_relays
    seed = tuple(int(s) for s in np.atleast_1d(seed))
    hap_scale = 1.0 / np.sqrt(path_loss.noise_mw)
    le = 10.0 ** (-path_loss.direct_extra_attenuation_db / 10.0)

    def link(key, size, gain):
        return np.sqrt(gain) * _cn(np.random.default_rng([*seed, *key]), size)

    f0 = hap_scale * link((0,), K, path_loss.gain(_dist(topology.hap, topology.receiver)) * le)
    f = np.zeros((N, K), dtype=np.complex128)
    g = np.zeros(N, dtype=np.complex128)
    z = np.zeros((N, N), dtype=np.complex128)
    for n, pos in enumerate(topology.relays):
        f[n] = hap_scale * link((1, n), K, path_loss.gain(_dist(topology.hap, pos)))
        g[n] = link((2, n), 1, path_loss.gain(_dist(pos, topology.receiver)))[0]
        for m in range(n + 1, N):
            z[n, m] = z[m, n] = link((3, n, m), 1, path_loss.gain(_dist(pos, topology.relays[m])))[0]
    return ChannelRealization(f0, f, g, z)


@dataclass(frozen=True)
class RelayConfig:
    modes: np.ndarray  # (N,) int, 1 = passive
    phases: np.ndarray  # (N,) radians in [0, 2pi]
    gamma_max: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.gamma_max <= 1.0:
            raise StructuralError("reflection magnitude must lie in [0, 1]")
        ph = np.asarray(self.phases, dtype=float)
        if np.any(ph < 0) or np.any(ph > 2 * np.pi + 1e-12):
            raise StructuralError("phases must lie in [0, 2pi]")

    @property
    def reflection(self) -> np.ndarray:
        return self.gamma_max * np.exp(1j * np.asarray(self.phases, dtype=float))


def relay_config(modes, phases=None, gamma_max: float = 0.5) -> RelayConfig:
    modes = np.asarray(modes, dtype=np.int64)
    if phases is None:
        phases = np.zeros(modes.shape[0])
    return RelayConfig(modes, np.asarray(phases, dtype=float), gamma_max)


@dataclass(frozen=True)
class EnhancedChannels:
    f0_hat: np.ndarray  # (K,)
    f_hat_all: np.ndarray  # (N, K) enhanced HAP->relay channel of every relay
    g_hat_all: np.ndarray  # (N,)
    active: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def f_hat(self) -> np.ndarray:
        return self.f_hat_all[self.active]

    @property
    def g_hat(self) -> np.ndarray:
        return self.g_hat_all[self.active]

    @property
    def K(self) -> int:
        return self.f0_hat.shape[0]

    def restrict(self, active) -> "EnhancedChannels":
        return EnhancedChannels(self.f0_hat, self.f_hat_all, self.g_hat_all,
                                np.asarray(active, dtype=np.int64))


def enhance_channels(ch: ChannelRealization, cfg: RelayConfig) -> EnhancedChannels:
    b = np.asarray(cfg.modes)
    if b.shape != (ch.N,) or np.asarray(cfg.phases).shape != (ch.N,):
        raise StructuralError(f"relay config has {b.shape} modes for {ch.N} relays")
    coef = b * cfg.reflection  # b_k Gamma_k, zero for active relays
    f0_hat = ch.f0 + (coef * ch.g) @ ch.f
    # column n of z collects z_{kn}; z has a zero diagonal so no self-reflection
    f_hat = ch.f + (ch.z.T * coef[None, :]) @ ch.f
    g_hat = ch.g + ch.z @ (coef * ch.g)
    active = np.flatnonzero(b == 0)
    return EnhancedChannels(f0_hat, f_hat, g_hat, active)


def cophase_passive(ch: ChannelRealization, modes, gamma_max: float) -> np.ndarray:
    """Greedy reflection phases that make each passive path add coherently to f0_hat."""
    modes = np.asarray(modes)
    passive = np.flatnonzero(modes == 1)
    if passive.size == 0:
        raise DegenerateInputError("no passive relays to co-phase")
    theta = np.zeros(ch.N)
    acc = ch.f0.copy()
    for k in passive:
        u = ch.g[k] * ch.f[k]
        c = hdot(acc, u)
        theta[k] = np.mod(-np.angle(c), 2 * np.pi) if c != 0 else 0.0
        acc = acc + gamma_max * np.exp(1j * theta[k]) * u
    return theta
