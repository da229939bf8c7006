"""Reference schemes and the exhaustive mode search used as the model-based optimum."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .drl import mode_vector
from .env import EnvConfig, EnvState, RelayEnv
from .network import ChannelRealization, cophase_passive, enhance_channels, relay_config
from .numerics import principal_eigvec, random_unit, unit_align
from .phy import HybridAction
from .polyblock import solve_lower_bound

BASELINES = ("random", "max_dl", "max_energy", "dl_only")
BASELINE_T = 0.25


def _state(ch: ChannelRealization, cfg: EnvConfig) -> EnvState:
    return EnvState(ch, np.full(ch.N, float(cfg.e_init)), 0)


def baseline_action(scheme: str, ch: ChannelRealization, rng=None) -> HybridAction:
    """All relays active, t = 1/4, beamformers set by the scheme."""
    N, K = ch.N, ch.K
    modes = np.zeros(N, dtype=np.int64)
    if scheme == "random":
        rng = np.random.default_rng(0) if rng is None else rng
        w0, w1 = random_unit(rng, K), random_unit(rng, K)
    elif scheme == "max_dl":
        w0 = w1 = unit_align(ch.f0)
    elif scheme == "max_energy":
        _, v = principal_eigvec(ch.f.T @ ch.f.conj())
        w0 = w1 = v / np.linalg.norm(v)
    else:
        raise ValueError(f"no action form for scheme {scheme!r}")
    return HybridAction(BASELINE_T, w0, w1, modes, np.zeros(N))


def run_baseline(scheme: str, ch: ChannelRealization, cfg: EnvConfig, rng=None) -> float:
    if scheme == "dl_only":
        return float(np.log2(1.0 + cfg.budget.p_t * np.linalg.norm(ch.f0) ** 2))
    if scheme not in BASELINES:
        raise ValueError(f"unknown baseline {scheme!r}")
    env = RelayEnv(cfg)
    return env.evaluate(_state(ch, cfg), baseline_action(scheme, ch, rng))


@dataclass
class ModeSearchResult:
    reward: float
    modes: np.ndarray
    action: HybridAction
    lower_bound: float


def lower_bound_action(ch: ChannelRealization, cfg: EnvConfig, modes, eps=1e-2, lam_tol=1e-3,
                       max_iter=200) -> tuple[HybridAction, float]:
    """Co-phased passive relays plus the lower-bound beamformers for one mode vector."""
    modes = np.asarray(modes, dtype=np.int64)
    theta = cophase_passive(ch, modes, cfg.gamma_max) if modes.any() else np.zeros(ch.N)
    enh = enhance_channels(ch, relay_config(modes, theta, cfg.gamma_max))
    lb = solve_lower_bound(enh, cfg.budget, eps=eps, max_iter=max_iter, lam_tol=lam_tol)
    return lb.action(enh, cfg.budget, modes, theta), lb.value


def best_modes(ch: ChannelRealization, cfg: EnvConfig, eps=1e-2, lam_tol=1e-3, max_iter=200) -> ModeSearchResult:
    """Exhaustive search over all 2^N mode vectors; ties keep the lowest index."""
    env = RelayEnv(cfg)
    state = _state(ch, cfg)
    best = None
    for idx in range(2 ** ch.N):
        modes = mode_vector(idx, ch.N)
        action, value = lower_bound_action(ch, cfg, modes, eps, lam_tol, max_iter)
        r = env.evaluate(state, action)
        if best is None or r > best.reward:
            best = ModeSearchResult(r, modes, action, value)
    return best
