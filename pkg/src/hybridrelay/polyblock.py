"""Polyblock outer approximation for max t log2(1 + gamma) over the (t, gamma) normal set.

A point (t, gamma) is feasible when the relaxed optimum at hop length t reaches
gamma. The feasible set is downward closed, so the best point sits on its upper
boundary and a shrinking union of boxes [0, v] brackets it from above.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .network import EnhancedChannels
from .phy import T_MIN, HybridAction, LinkBudget, matched_powers
from .sdp import FeasibilityInstance, FeasibilityResult, probe, solve_feasibility


@dataclass(frozen=True, order=True)
class Vertex:
    t: float
    gamma_bar: float

    def dominated_by(self, other: "Vertex") -> bool:
        return self.t <= other.t and self.gamma_bar <= other.gamma_bar

    def scaled(self, lam: float) -> "Vertex":
        return Vertex(lam * self.t, lam * self.gamma_bar)


def rate(v: Vertex) -> float:
    return float(v.t * np.log2(1.0 + v.gamma_bar))


@dataclass
class Polyblock:
    vertices: list[Vertex]
    r_upper: float = np.inf
    r_lower: float = 0.0

    def best_vertex(self) -> Vertex:
        """Highest-rate vertex; ties go to the smallest t, then smallest gamma."""
        return min(self.vertices, key=lambda v: (-rate(v), v.t, v.gamma_bar))

    def covers(self, point: Vertex) -> bool:
        return any(point.dominated_by(v) for v in self.vertices)


def _prune(vertices: list[Vertex]) -> list[Vertex]:
    """Drop vertices dominated by another one (a 2-D staircase sweep)."""
    keep, best_g = [], -np.inf
    for v in sorted(set(vertices), key=lambda v: (-v.t, -v.gamma_bar)):
        if v.gamma_bar > best_g:
            keep.append(v)
            best_g = v.gamma_bar
    return sorted(keep)


def cut(poly: Polyblock, z_k: Vertex, o_k: Vertex) -> Polyblock:
    """Remove the box (o_k, z_k] and every vertex strictly above o_k.

    Each vertex v >= o_k is replaced by (o_k.t, v.gamma) and (v.t, o_k.gamma).
    """
    if not o_k.dominated_by(z_k):
        raise DomainError("projection point must lie below the vertex")
    out = []
    for v in poly.vertices:
        if o_k.dominated_by(v):
            if o_k.t < v.t:
                out.append(Vertex(o_k.t, v.gamma_bar))
            if o_k.gamma_bar < v.gamma_bar:
                out.append(Vertex(v.t, o_k.gamma_bar))
        else:
            out.append(v)
    # children equal to o_k itself are feasible points and carry no upper information
    out = [v for v in out if v != o_k or o_k == z_k]
    return Polyblock(_prune(out), poly.r_upper, poly.r_lower)


def gamma_max(enh: EnhancedChannels, p_t: float) -> float:
    return float(2 * p_t * np.linalg.norm(enh.f0_hat) ** 2 + p_t * np.sum(np.abs(enh.f_hat) ** 2))


@dataclass
class Witness:
    t: float
    w0: np.ndarray
    w1: np.ndarray
    m_rank1: float

    @property
    def value(self) -> float:
        return float(self.t * np.log2(1.0 + self.m_rank1))


@dataclass
class ProjectionResult:
    lam: float  # largest scale verified feasible
    point: Vertex  # lam * z
    lam_hi: float  # smallest scale verified infeasible (1.0 when z is feasible)
    witness: Witness | None
    trace: list[tuple[float, bool]]

    cut_point: Vertex  # lam_hi * z; cutting here never removes a feasible point


class _Oracle:
    """Feasibility verdicts for one lower-bound solve.

    The relaxed optimum m(tau) is nonincreasing in tau, so every solve also
    certifies a region: a value P reached at tau makes (tau' <= tau, gamma <= P)
    feasible, and a dual bound U at tau makes (tau' >= tau, gamma >= U)
    infeasible. Queries inside a certified region skip the solver.
    """

    def __init__(self, enh, budget, rng):
        self.inst = FeasibilityInstance(enh, budget.p_t, budget.eta, 0.5)
        self.rng = rng
        self.feasible: list[Vertex] = []
        self.lower: list[tuple[float, float]] = []
        self.upper: list[tuple[float, float]] = []
        self.best: Witness | None = None
        self.solves = 0

    def _cached(self, v: Vertex):
        if any(v.t <= t and v.gamma_bar <= m for t, m in self.lower):
            return True
        if any(v.t >= t and v.gamma_bar >= u for t, u in self.upper):
            return False
        return None

    def __call__(self, v: Vertex) -> tuple[bool, FeasibilityResult | None]:
        hit = self._cached(v)
        if hit is not None:
            if hit:
                self.feasible.append(v)
            return hit, None
        self.solves += 1
        ver = probe(self.inst.at(v.t), v.gamma_bar, rng=self.rng)
        self.lower.append((v.t, ver.lower))
        if np.isfinite(ver.upper):
            self.upper.append((v.t, ver.upper))
        if ver.feasible:
            self.feasible.append(v)
            res = ver.result
            w = Witness(v.t, res.w0, res.w1, res.rank1_value)
            if self.best is None or w.value > self.best.value:
                self.best = w
        return ver.feasible, ver.result

    def known_lambda(self, z: Vertex) -> float:
        """Largest scale certified by an earlier feasible point (downward closure)."""
        lo = 0.0
        for t, m in self.lower:
            lo = max(lo, min(t / z.t, m / z.gamma_bar if z.gamma_bar > 0 else np.inf))
        for p in self.feasible:
            lo = max(lo, min(p.t / z.t, p.gamma_bar / z.gamma_bar if z.gamma_bar > 0 else np.inf))
        return min(lo, 1.0)


def project(z: Vertex, oracle, lam_tol: float = 1e-3, lo: float = 0.0) -> ProjectionResult:
    """Bisection for the largest lam with lam * z feasible.

    ``oracle`` maps a Vertex to (verdict, result) and ``lo`` must be a scale
    already known to be feasible. Stops once hi - lo <= lam_tol * hi. While the
    bracket spans more than a factor of four the split is geometric, since the
    boundary can sit orders of magnitude below the vertex.
    """
    if lam_tol <= 0:
        raise DomainError("lam_tol must be positive")
    trace = []
    ok, res = oracle(z)
    trace.append((1.0, ok))
    if ok:
        return ProjectionResult(1.0, z, 1.0, _witness(z, res), trace, z)
    witness = None
    hi = 1.0
    while hi - lo > lam_tol * hi:
        mid = np.sqrt(lo * hi) if lo > 0 and hi > 4 * lo else 0.5 * (lo + hi)
        if lo == 0 and hi < 1e-12:
            break
        pt = z.scaled(mid)
        ok, res = oracle(pt)
        trace.append((mid, ok))
        if ok:
            lo, witness = mid, _witness(pt, res)
        else:
            hi = mid
    return ProjectionResult(lo, z.scaled(lo), hi, witness, trace, z.scaled(hi))


def _witness(v: Vertex, res) -> Witness | None:
    if res is None:
        return None
    return Witness(v.t, res.w0, res.w1, res.rank1_value)


@dataclass
class LowerBoundResult:
    value: float
    t_opt: float
    w0_opt: np.ndarray
    w1_opt: np.ndarray
    iterations: int
    r_upper: float
    r_lower: float
    converged: bool
    solves: int = 0
    history: list[tuple[float, float]] = field(default_factory=list)
    traces: list[list[tuple[float, bool]]] = field(default_factory=list)
    feasible_points: list[Vertex] = field(default_factory=list)

    @property
    def gap(self) -> float:
        return self.r_upper - self.r_lower

    def action(self, enh: EnhancedChannels, budget: LinkBudget, modes, phases) -> HybridAction:
        """Executable action: witness beamformers with matched relay powers."""
        t = float(np.clip(self.t_opt, T_MIN, 0.5))
        powers = matched_powers(enh, self.w0_opt, self.w1_opt, t, budget)
        return HybridAction(t, self.w0_opt, self.w1_opt, np.asarray(modes), np.asarray(phases, dtype=float),
                            powers)


def _direct_only(enh: EnhancedChannels, budget: LinkBudget) -> LowerBoundResult:
    res = solve_feasibility(FeasibilityInstance(enh.restrict([]), budget.p_t, budget.eta, 0.5))
    v = 0.5 * np.log2(1.0 + res.rank1_value)
    return LowerBoundResult(v, 0.5, res.w0, res.w1, 0, v, v, True, 1)


def solve_lower_bound(enh: EnhancedChannels, budget: LinkBudget, active=None, eps: float = 1e-2,
                      max_iter: int = 200, lam_tol: float = 1e-3, rng=None) -> LowerBoundResult:
    if eps <= 0 or max_iter < 1:
        raise DomainError("need eps > 0 and max_iter >= 1")
    if active is not None:
        enh = enh.restrict(active)
    if np.linalg.norm(enh.f0_hat) == 0:
        return _direct_only(enh, budget)
    rng = np.random.default_rng(0) if rng is None else rng
    oracle = _Oracle(enh, budget, rng)
    p = budget.p_t
    f0sq = float(np.linalg.norm(enh.f0_hat) ** 2)
    # every relay can stay silent at t = 1/2, so this point is always feasible
    oracle.feasible.append(Vertex(0.5, 2 * p * f0sq))
    poly = Polyblock([Vertex(0.5, gamma_max(enh, p))], r_lower=rate(Vertex(0.5, 2 * p * f0sq)))
    history, traces = [], []
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        z = poly.best_vertex()
        poly.r_upper = min(poly.r_upper, rate(z))
        if poly.r_upper - poly.r_lower <= eps:
            converged = True
            history.append((poly.r_lower, poly.r_upper))
            break
        proj = project(z, oracle, lam_tol, lo=oracle.known_lambda(z))
        traces.append(proj.trace)
        poly.r_lower = max(poly.r_lower, rate(proj.point))
        history.append((poly.r_lower, poly.r_upper))
        if proj.lam == 1.0:
            poly.r_upper = poly.r_lower = max(poly.r_lower, rate(z))
            converged = True
            break
        poly = cut(poly, z, proj.cut_point)
    if oracle.best is None:
        # no solve came back feasible with a witness; use the silent-relay point
        return _with_meta(_direct_only(enh, budget), it, poly, converged, oracle, history, traces)
    b = oracle.best
    res = LowerBoundResult(b.value, b.t, b.w0, b.w1, it, poly.r_upper, poly.r_lower, converged,
                           oracle.solves, history, traces, list(oracle.feasible))
    direct = _direct_only(enh, budget)
    if direct.value > res.value:
        res.value, res.t_opt, res.w0_opt, res.w1_opt = direct.value, 0.5, direct.w0_opt, direct.w1_opt
    return res


def _with_meta(res, it, poly, converged, oracle, history, traces):
    res.iterations, res.r_upper, res.r_lower = it, poly.r_upper, poly.r_lower
    res.converged, res.solves, res.history, res.traces = converged, oracle.solves, history, traces
    res.feasible_points = list(oracle.feasible)
    return res


def solve_fixed_t(enh: EnhancedChannels, budget: LinkBudget, active=None, t: float = 0.25, rng=None):
    """Single relaxed solve at hop length t. Returns (value, w0, w1)."""
    if not T_MIN <= t <= 0.5 - T_MIN:
        raise DomainError(f"t={t} outside [{T_MIN}, {0.5 - T_MIN}]")
    if active is not None:
        enh = enh.restrict(active)
    res = solve_feasibility(FeasibilityInstance(enh, budget.p_t, budget.eta, t), rng=rng)
    return float(t * np.log2(1.0 + res.rank1_value)), res.w0, res.w1
