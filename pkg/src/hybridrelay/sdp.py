"""Relaxed beamforming feasibility problem, rank-1 restoration and a sampling oracle.

For a fixed hop length tau and active set, the problem is

    max  p ||f0||^2 + p (f0^H W1 f0 + sum_n s_n1)
    s.t. s_n1 <= f_n^H W1 f_n,
         s_n1 + p s_n1^2 <= psi_n (1/tau - 2) f_n^H W0 f_n,
         tr W_i <= 1,  W_i PSD.

The second constraint is the Schur form of the 2x2 block
[[q, sqrt(p) s], [sqrt(p) s, 1]] >= 0 with q = c_n s_n0 - s_n1.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from . import _barrier as _b
from .errors import DomainError, SolverError
from .network import EnhancedChannels
from .numerics import principal_eigvec, random_unit, unit_align
from .phy import LinkBudget

RANDOMIZATION_SAMPLES = 200
_MAX_NEWTON = 400
MU = 16.0
CENTER_TOL = 1e-9


def lmi_holds(q: float, s1: float, p_t: float) -> bool:
    """Scalar test for [[q, sqrt(p) s1], [sqrt(p) s1, 1]] being PSD."""
    return bool(q >= 0.0 and q >= p_t * s1 * s1)


def lmi_matrix(q: float, s1: float, p_t: float) -> np.ndarray:
    r = np.sqrt(p_t) * s1
    return np.array([[q, r], [r, 1.0]])


def lmi_cap(c_s0, p_t: float):
    """Largest s with s + p s^2 <= c_s0 (the positive root, computed stably)."""
    c_s0 = np.maximum(np.asarray(c_s0, dtype=float), 0.0)
    return 2.0 * c_s0 / (1.0 + np.sqrt(1.0 + 4.0 * p_t * c_s0))


@dataclass(frozen=True)
class FeasibilityInstance:
    enh: EnhancedChannels  # active set taken from enh.active
    p_t: float
    eta: float
    tau: float
    cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if not 0.0 < self.tau <= 0.5:
            raise DomainError(f"tau={self.tau} outside (0, 1/2]")
        if self.p_t <= 0:
            raise DomainError("p_t must be positive")

    @classmethod
    def build(cls, enh: EnhancedChannels, budget: LinkBudget, tau: float, active=None):
        if active is not None:
            enh = enh.restrict(active)
        return cls(enh, budget.p_t, budget.eta, float(tau))

    def at(self, tau: float) -> "FeasibilityInstance":
        """Same channels at another hop length; shares the coefficient cache."""
        return replace(self, tau=float(tau))

    @property
    def f0_sq(self) -> float:
        return float(np.linalg.norm(self.enh.f0_hat) ** 2)

    @property
    def psi(self) -> np.ndarray:
        return self.eta * self.p_t * np.abs(self.enh.g_hat) ** 2 * self.f0_sq

    @property
    def budget_coeff(self) -> np.ndarray:
        """c_n = psi_n (1/tau - 2)."""
        return self.psi * (1.0 / self.tau - 2.0)


@dataclass(frozen=True)
class FeasibilityResult:
    m_k: float
    W0: np.ndarray
    W1: np.ndarray
    w0: np.ndarray
    w1: np.ndarray
    s_values: np.ndarray  # (|N_a|, 2): (s_n0, s_n1) of the rank-1 witness
    rank1_value: float
    newton_steps: int = 0

    @property
    def rank1_gap(self) -> float:
        return self.m_k - self.rank1_value


def rank1_objective(inst: FeasibilityInstance, w0, w1) -> tuple[float, np.ndarray]:
    """Objective of a unit beamformer pair with s_n1 capped to satisfy the LMI."""
    F = inst.enh.f_hat
    s0 = np.abs(F.conj() @ w0) ** 2
    s1 = np.minimum(np.abs(F.conj() @ w1) ** 2, lmi_cap(inst.budget_coeff * s0, inst.p_t))
    val = inst.p_t * (inst.f0_sq + abs(np.vdot(inst.enh.f0_hat, w1)) ** 2 + s1.sum())
    return float(val), np.column_stack([s0, s1])


def _batch_objective(inst: FeasibilityInstance, W0s: np.ndarray, W1s: np.ndarray) -> np.ndarray:
    F = inst.enh.f_hat
    s0 = np.abs(W0s @ F.conj().T) ** 2
    s1 = np.minimum(np.abs(W1s @ F.conj().T) ** 2, lmi_cap(inst.budget_coeff[None, :] * s0, inst.p_t))
    d = np.abs(W1s @ inst.enh.f0_hat.conj()) ** 2
    return inst.p_t * (inst.f0_sq + d + s1.sum(axis=1))


def _sample_from(W: np.ndarray, rng: np.random.Generator, n: int) -> np.ndarray:
    lam, V = np.linalg.eigh(W)
    root = V * np.sqrt(np.clip(lam, 0.0, None))[None, :]
    z = (rng.standard_normal((n, W.shape[0])) + 1j * rng.standard_normal((n, W.shape[0]))) / np.sqrt(2)
    w = z @ root.T
    nrm = np.linalg.norm(w, axis=1, keepdims=True)
    return np.where(nrm > 0, w / np.where(nrm > 0, nrm, 1.0), 0.0)


def _unit_eig(W: np.ndarray) -> np.ndarray:
    lam, v = principal_eigvec(W)
    if lam <= 0:
        return np.zeros(W.shape[0], dtype=np.complex128)
    return v / np.linalg.norm(v)


def extract_rank1(W0, W1, inst: FeasibilityInstance, rng=None, samples: int = RANDOMIZATION_SAMPLES,
                  relaxed_value: float | None = None):
    """Unit beamformers (w0, w1) from relaxed solutions.

    Starts from the principal eigenvectors. When they fall short of the relaxed
    value, Gaussian samples drawn with covariance W_i are normalized and the best
    pair is kept. Every candidate is feasible by construction because s_n1 is
    capped through :func:`lmi_cap`. Returns (w0, w1, s_values, objective).
    """
    w0, w1 = _unit_eig(W0), _unit_eig(W1)
    best, sv = rank1_objective(inst, w0, w1)
    if relaxed_value is None or best < relaxed_value * (1 - 1e-7):
        rng = np.random.default_rng(0) if rng is None else rng
        c0 = np.vstack([w0[None, :], _sample_from(W0, rng, samples)])
        c1 = np.vstack([w1[None, :], _sample_from(W1, rng, samples)])
        # pair each w1 candidate with the eigen w0 and with its own sample
        vals_a = _batch_objective(inst, np.broadcast_to(w0, c1.shape), c1)
        vals_b = _batch_objective(inst, c0, c1)
        ia, ib = int(np.argmax(vals_a)), int(np.argmax(vals_b))
        if vals_a[ia] > best:
            w1, best = c1[ia], vals_a[ia]
        if vals_b[ib] > best:
            w0, w1, best = c0[ib], c1[ib], vals_b[ib]
        best, sv = rank1_objective(inst, w0, w1)
    return w0, w1, sv, best


@lru_cache(maxsize=None)
def _basis(K: int):
    E = _b.hermitian_basis(K)
    tr = np.ascontiguousarray(np.real(np.einsum("kii->k", E)))
    return E, tr, _b.basis_entries(K)


def _closed_form(inst: FeasibilityInstance) -> FeasibilityResult:
    """No relay can contribute: only the direct term remains."""
    K = inst.enh.K
    f0 = inst.enh.f0_hat
    if inst.f0_sq > 0:
        w = unit_align(f0)
    else:
        w = np.zeros(K, dtype=np.complex128)
        w[0] = 1.0
    W = np.outer(w, w.conj())
    m = 2.0 * inst.p_t * inst.f0_sq
    val, sv = rank1_objective(inst, w, w)
    return FeasibilityResult(m, W, W.copy(), w, w, sv, val)


def _coefficients(inst: FeasibilityInstance):
    """tau-independent solver data, cached on the instance."""
    if "coef" not in inst.cache:
        F = inst.enh.f_hat
        sig = np.sum(np.abs(F) ** 2, axis=1)
        K = inst.enh.K
        E, tr, entries = _basis(K)
        a0 = np.ascontiguousarray(_b.quad_coords(E, inst.enh.f0_hat))
        A = np.array([_b.quad_coords(E, f) / s if s > 0 else np.zeros(K * K) for f, s in zip(F, sig)])
        A = A.reshape(len(sig), K * K)
        inst.cache["coef"] = (sig, a0, A, tr, entries, inst.psi)
    return inst.cache["coef"]


def _run(inst: FeasibilityInstance, tol: float, target: float | None):
    """Returns (status, W0, W1, lower, upper, steps) or None for the closed-form case.

    ``lower`` is the relaxed objective of the returned point and ``upper`` a
    duality-gap bound on the relaxed optimum (inf when the solve stopped early
    on reaching the target).
    """
    sig, a0, A, tr, (brow, bcol, bcoef), psi = _coefficients(inst)
    c = psi * (1.0 / inst.tau - 2.0)
    keep = (sig > 0) & (c > 0)
    if inst.f0_sq == 0 or not keep.any():
        return None
    K = inst.enh.K
    sig_k = np.ascontiguousarray(sig[keep])
    ub = inst.f0_sq + sig_k.sum()
    offset = inst.f0_sq / ub
    p = inst.p_t
    tgt = np.nan if target is None else (target / p - inst.f0_sq) / ub
    status, z, obj, tpar, steps = _b.barrier_solve(
        K, brow, bcol, bcoef, tr, a0, np.ascontiguousarray(A[keep]), sig_k, np.ascontiguousarray(c[keep]),
        p, ub, offset, tol, tgt, _MAX_NEWTON, MU, CENTER_TOL)
    d = K * K
    gap = (2 * K + 2 + 2 * keep.sum()) / tpar
    if status == _b.STATUS_STALLED:
        if gap > 1e-5 * (obj + offset):
            raise SolverError("barrier method stalled",
                              trace=[("newton_steps", steps), ("barrier_t", tpar), ("objective", obj)])
        status = _b.STATUS_OPTIMAL
    W0 = _b._assemble(z[:d].copy(), K)
    W1 = _b._assemble(z[d:2 * d].copy(), K)
    lower = p * (inst.f0_sq + ub * obj)
    upper = np.inf if status == _b.STATUS_FEASIBLE else p * (inst.f0_sq + ub * (obj + 1.01 * gap))
    return status, W0, W1, lower, upper, steps


def solve_feasibility(inst: FeasibilityInstance, tol: float = 1e-7, rng=None) -> FeasibilityResult:
    """Solve the relaxation to relative accuracy ``tol`` and restore a rank-1 witness."""
    out = _run(inst, tol, None)
    if out is None:
        return _closed_form(inst)
    _, W0, W1, m, _, steps = out
    w0, w1, sv, val = extract_rank1(W0, W1, inst, rng, relaxed_value=m)
    return FeasibilityResult(m, W0, W1, w0, w1, sv, val, steps)


@dataclass(frozen=True)
class Verdict:
    feasible: bool
    result: FeasibilityResult | None  # rank-1 witness when feasible
    lower: float  # certified lower bound on the relaxed optimum
    upper: float  # certified upper bound on the relaxed optimum


def probe(inst: FeasibilityInstance, gamma_bar: float, tol: float = 1e-7, rng=None) -> Verdict:
    """Decide whether the relaxed optimum reaches ``gamma_bar``.

    Stops as soon as either a primal point reaches the target or the duality
    gap certifies that it cannot.
    """
    out = _run(inst, tol, gamma_bar)
    if out is None:
        res = _closed_form(inst)
        ok = res.m_k >= gamma_bar
        return Verdict(ok, res if ok else None, res.m_k, res.m_k)
    status, W0, W1, lower, upper, steps = out
    ok = status == _b.STATUS_FEASIBLE or (status == _b.STATUS_OPTIMAL and lower >= gamma_bar)
    if not ok:
        return Verdict(False, None, lower, upper)
    w0, w1, sv, val = extract_rank1(W0, W1, inst, rng, relaxed_value=lower)
    return Verdict(True, FeasibilityResult(lower, W0, W1, w0, w1, sv, val, steps), lower, upper)


def check_feasible(inst: FeasibilityInstance, gamma_bar: float, tol: float = 1e-7, rng=None):
    """(verdict, result) form of :func:`probe`."""
    v = probe(inst, gamma_bar, tol, rng)
    return v.feasible, v.result


def feasibility_oracle(inst: FeasibilityInstance, samples: int, rng=None) -> float:
    """Best objective over uniformly drawn unit beamformer pairs."""
    if samples < 1:
        raise DomainError("samples must be >= 1")
    rng = np.random.default_rng(0) if rng is None else rng
    K = inst.enh.K
    w0 = np.array([random_unit(rng, K) for _ in range(samples)])
    w1 = np.array([random_unit(rng, K) for _ in range(samples)])
    return float(np.max(_batch_objective(inst, w0, w1)))
