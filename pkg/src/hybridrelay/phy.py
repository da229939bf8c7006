"""Two-hop SNRs, harvested power budgets and the slot throughput."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConstraintViolation, DomainError, StructuralError
from .network import EnhancedChannels

T_MIN = 1e-3
BUDGET_TOL = 1e-9


@dataclass(frozen=True)
class LinkBudget:
    p_t: float = 1.0  # HAP transmit power, mW (channels carry the 1/noise factor)
    eta: float = 0.6

    def __post_init__(self):
        if self.p_t <= 0 or not 0 < self.eta <= 1:
            raise DomainError("need p_t > 0 and eta in (0, 1]")


@dataclass(frozen=True)
class HybridAction:
    t: float
    w0: np.ndarray
    w1: np.ndarray
    modes: np.ndarray
    phases: np.ndarray
    relay_powers: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        if not T_MIN <= self.t <= 0.5:
            raise DomainError(f"slot fraction t={self.t} outside [{T_MIN}, 0.5]")
        for name in ("w0", "w1"):
            w = getattr(self, name)
            if w.ndim != 1 or not np.all(np.isfinite(w)):
                raise StructuralError(f"{name} must be a finite vector")
            if np.linalg.norm(w) > 1 + 1e-9:
                raise DomainError(f"||{name}|| exceeds 1")
        if self.modes.shape != self.phases.shape:
            raise StructuralError("modes and phases differ in length")
        if np.any(self.phases < 0) or np.any(self.phases > 2 * np.pi + 1e-12):
            raise DomainError("phases must lie in [0, 2pi]")
        if np.any(np.asarray(self.relay_powers) < 0):
            raise DomainError("relay powers must be nonnegative")

    @property
    def active(self) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.modes) == 0)

    def with_powers(self, powers) -> "HybridAction":
        return HybridAction(self.t, self.w0, self.w1, self.modes, self.phases,
                            np.asarray(powers, dtype=float))


def snr_first_hop(enh: EnhancedChannels, w1, p_t: float) -> float:
    return float(p_t * abs(np.vdot(enh.f0_hat, w1)) ** 2)


def amplifier_coeff(p_n: float, y_n: complex) -> float:
    if p_n < 0:
        raise DomainError("relay power must be nonnegative")
    return float(np.sqrt(p_n / (1.0 + abs(y_n) ** 2)))


def relay_signals(enh: EnhancedChannels, w1, p_t: float) -> np.ndarray:
    """y_n = sqrt(p_t) f_n_hat^H w1 for each active relay."""
    return np.sqrt(p_t) * (enh.f_hat.conj() @ np.asarray(w1))


def snr_second_hop(enh: EnhancedChannels, w1, p_t: float, powers, cophase: bool = True) -> float:
    """Second-hop SNR with the HAP re-sending along w2 = f0_hat / ||f0_hat||.

    With ``cophase`` each active relay rotates its forwarded signal so it lands
    in phase with the direct path, i.e. the relays beamform collaboratively.
    ``cophase=False`` keeps a real amplifier coefficient, so misaligned relay
    paths can interfere destructively.
    """
    powers = np.asarray(powers, dtype=float)
    if powers.shape != (enh.active.size,):
        raise StructuralError(f"{powers.size} powers for {enh.active.size} active relays")
    direct = np.sqrt(p_t) * np.linalg.norm(enh.f0_hat)
    if enh.active.size == 0:
        return float(direct ** 2)
    y = relay_signals(enh, w1, p_t)
    x = np.sqrt(powers / (1.0 + np.abs(y) ** 2))
    g = enh.g_hat
    terms = x * np.abs(y * g) if cophase else x * y * g
    num = abs(terms.sum() + direct) ** 2
    den = 1.0 + np.sum(np.abs(x * g) ** 2)
    return float(num / den)


def _check_t(t: float) -> None:
    if not 0.0 < t <= 0.5:
        raise DomainError(f"hop length t={t} outside (0, 1/2]")


def power_budget(enh: EnhancedChannels, w0, t: float, budget: LinkBudget, relay: int) -> float:
    """Largest transmit power relay ``relay`` (global index) can sustain over one hop."""
    _check_t(t)
    s0 = abs(np.vdot(enh.f_hat_all[relay], w0)) ** 2
    return float(budget.eta * (1.0 / t - 2.0) * budget.p_t * s0)


def power_budgets(enh: EnhancedChannels, w0, t: float, budget: LinkBudget) -> np.ndarray:
    """Vector form of :func:`power_budget` over the active relays."""
    _check_t(t)
    s0 = np.abs(enh.f_hat.conj() @ np.asarray(w0)) ** 2
    return budget.eta * (1.0 / t - 2.0) * budget.p_t * s0


def harvested_energy(enh: EnhancedChannels, w0, t: float, budget: LinkBudget) -> np.ndarray:
    """Energy every relay collects during the 1-2t power-transfer sub-slot."""
    _check_t(t)
    s0 = np.abs(enh.f_hat_all.conj() @ np.asarray(w0)) ** 2
    return budget.eta * (1.0 - 2.0 * t) * budget.p_t * s0


def rayleigh_bound(enh: EnhancedChannels, w1, p_t: float) -> float:
    """p_t ||f0_hat||^2 + p_t sum_{n in active + direct} |f_n_hat^H w1|^2 (bounds gamma1 + gamma2)."""
    w1 = np.asarray(w1)
    s = np.abs(enh.f_hat.conj() @ w1) ** 2
    return float(p_t * (np.linalg.norm(enh.f0_hat) ** 2 + abs(np.vdot(enh.f0_hat, w1)) ** 2 + s.sum()))


def matched_powers(enh: EnhancedChannels, w0, w1, t: float, budget: LinkBudget) -> np.ndarray:
    """Relay powers that make the co-phased second hop meet the Rayleigh bound, capped by the budget."""
    caps = power_budgets(enh, w0, t, budget)
    if enh.active.size == 0:
        return caps
    s1 = np.abs(enh.f_hat.conj() @ np.asarray(w1)) ** 2
    f0sq = np.linalg.norm(enh.f0_hat) ** 2
    g2 = np.abs(enh.g_hat) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        ideal = np.where(g2 * f0sq > 0, s1 * (1 + budget.p_t * s1) / (f0sq * g2), np.inf)
    out = np.minimum(caps, ideal)
    out[g2 == 0] = 0.0
    return out


def throughput(enh: EnhancedChannels, action: HybridAction, budget: LinkBudget,
               cophase: bool = True) -> float:
    """t log2(1 + gamma1 + gamma2); raises ConstraintViolation on an overdrawn relay."""
    p = np.asarray(action.relay_powers, dtype=float)
    if p.shape != (enh.active.size,):
        raise StructuralError(f"{p.size} relay powers for {enh.active.size} active relays")
    if enh.active.size:
        caps = power_budgets(enh, action.w0, action.t, budget)
        over = p - caps - BUDGET_TOL * np.maximum(1.0, caps)
        if np.any(over > 0):
            i = int(np.argmax(over))
            raise ConstraintViolation(int(enh.active[i]), float(p[i]), float(caps[i]))
    g1 = snr_first_hop(enh, action.w1, budget.p_t)
    g2 = snr_second_hop(enh, action.w1, budget.p_t, p, cophase=cophase)
    return float(action.t * np.log2(1.0 + g1 + g2))
