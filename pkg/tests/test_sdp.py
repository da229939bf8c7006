import numpy as np
import pytest

from hybridrelay.errors import DomainError
from hybridrelay.network import EnhancedChannels
from hybridrelay.numerics import is_psd, random_unit, unit_align
from hybridrelay.phy import LinkBudget
from hybridrelay.sdp import (FeasibilityInstance, check_feasible, extract_rank1, feasibility_oracle,
                             lmi_cap, lmi_holds, lmi_matrix, probe, rank1_objective, solve_feasibility)

from conftest import crandn


def make_instance(rng, K=2, n_active=1, tau=None, p_t=1.0):
    # magnitudes follow the default scenario: HAP links ~1e1..1e2 in noise units, raw relay links ~1e-2
    f0 = 10 * crandn(rng, K)
    F = 100 * crandn(rng, n_active, K)
    g = 0.01 * crandn(rng, n_active)
    enh = EnhancedChannels(f0, F, g, np.arange(n_active))
    tau = rng.uniform(0.05, 0.45) if tau is None else tau
    return FeasibilityInstance.build(enh, LinkBudget(p_t=p_t, eta=0.6), tau)


def sphere_grid(n):
    # (cos a, sin a e^{j phi}) covers the unit sphere of C^2 up to a global phase
    a = np.linspace(0, np.pi / 2, n)
    phi = np.linspace(0, 2 * np.pi, n, endpoint=False)
    A, P = np.meshgrid(a, phi, indexing="ij")
    return np.column_stack([np.cos(A).ravel(), (np.sin(A) * np.exp(1j * P)).ravel()])


def grid_optimum(inst, n=200):
    """Dense search over unit (w0, w1) in C^2 for a single active relay.

    The objective only sees w0 through s_0 = |f^H w0|^2 and grows with it, so the
    w0 search decouples from the w1 search.
    """
    W = sphere_grid(n)
    f = inst.enh.f_hat[0]
    s0 = np.max(np.abs(W @ f.conj()) ** 2)
    s1 = np.minimum(np.abs(W @ f.conj()) ** 2, lmi_cap(inst.budget_coeff[0] * s0, inst.p_t))
    d = np.abs(W @ inst.enh.f0_hat.conj()) ** 2
    return float(np.max(inst.p_t * (inst.f0_sq + d + s1)))


def test_lmi_examples():
    assert lmi_holds(1.0, 0.5, 1.0)
    assert not lmi_holds(0.2, 0.5, 1.0)
    assert not lmi_holds(-0.1, 0.0, 1.0)


def test_lmi_matches_eigenvalues_on_grid():
    # grid values are chosen off the q = p s^2 boundary so rounding cannot flip a verdict
    mismatches = 0
    for p in (0.1, 0.7, 3.0):
        for q in np.linspace(-1.03, 2.03, 41):
            for s in np.linspace(-1.51, 1.51, 41):
                mismatches += lmi_holds(q, s, p) != is_psd(lmi_matrix(q, s, p))
    assert mismatches == 0


def test_lmi_matches_eigenvalues_random(rng):
    q = rng.uniform(-1, 3, 10_000)
    s = rng.uniform(-2, 2, 10_000)
    p = 10 ** rng.uniform(-2, 1, 10_000)
    agree = [lmi_holds(*x) == is_psd(lmi_matrix(*x)) for x in zip(q, s, p)]
    assert all(agree)


def test_lmi_cap_is_boundary(rng):
    c = 10 ** rng.uniform(-3, 6, 100)
    for p in (0.1, 1.0, 10.0):
        s = lmi_cap(c, p)
        np.testing.assert_allclose(s + p * s * s, c, rtol=1e-12)
    assert lmi_cap(-1.0, 1.0) == 0


def test_no_active_relays_closed_form(rng):
    f0 = 10 * crandn(rng, 3)
    enh = EnhancedChannels(f0, np.zeros((0, 3), complex), np.zeros(0, complex))
    res = solve_feasibility(FeasibilityInstance.build(enh, LinkBudget(p_t=0.5), 0.2))
    assert res.m_k == pytest.approx(2 * 0.5 * np.linalg.norm(f0) ** 2)
    np.testing.assert_allclose(res.w1, unit_align(f0))


def test_half_slot_removes_relays(rng):
    inst = make_instance(rng, K=3, n_active=2, tau=0.5)
    res = solve_feasibility(inst)
    assert res.m_k == pytest.approx(2 * inst.p_t * inst.f0_sq)
    np.testing.assert_allclose(res.s_values[:, 1], 0)


@pytest.mark.parametrize("seed", range(6))
def test_relaxation_dominates_grid(seed):
    inst = make_instance(np.random.default_rng(seed))
    res = solve_feasibility(inst)
    grid = grid_optimum(inst)
    assert res.m_k >= grid - 1e-3 * max(1.0, grid)
    assert res.rank1_value <= res.m_k * (1 + 1e-7)
    # the relaxation is tight here: the restored pair reaches it
    assert res.rank1_value >= grid - 1e-3 * grid


@pytest.mark.parametrize("seed", range(4))
def test_against_conic_solver(seed):
    cp = pytest.importorskip("cvxpy")
    rng = np.random.default_rng(100 + seed)
    inst = make_instance(rng, K=3, n_active=3)
    F, p, c = inst.enh.f_hat, inst.p_t, inst.budget_coeff
    K = inst.enh.K
    scale = inst.f0_sq + np.sum(np.abs(F) ** 2)
    W0 = cp.Variable((K, K), hermitian=True)
    W1 = cp.Variable((K, K), hermitian=True)
    s = cp.Variable(len(F))
    cons = [W0 >> 0, W1 >> 0, cp.real(cp.trace(W0)) <= 1, cp.real(cp.trace(W1)) <= 1]
    for n, f in enumerate(F):
        a0 = cp.real(f.conj() @ W0 @ f) / scale
        a1 = cp.real(f.conj() @ W1 @ f) / scale
        cons += [s[n] <= a1, s[n] + p * scale * cp.square(s[n]) <= c[n] * a0]
    obj = cp.real(inst.enh.f0_hat.conj() @ W1 @ inst.enh.f0_hat) / scale + cp.sum(s)
    cp.Problem(cp.Maximize(obj), cons).solve(solver="CLARABEL")
    ref = p * (inst.f0_sq + scale * obj.value)
    assert solve_feasibility(inst).m_k == pytest.approx(ref, rel=1e-6)


def test_relaxation_dominates_sampling_oracle(rng):
    for _ in range(30):
        inst = make_instance(rng, K=int(rng.integers(1, 4)), n_active=int(rng.integers(1, 4)))
        res = solve_feasibility(inst)
        assert res.m_k >= feasibility_oracle(inst, 500, rng) * (1 - 1e-7)


def test_m_k_nonincreasing_in_tau(rng):
    inst = make_instance(rng, K=2, n_active=2)
    vals = [solve_feasibility(inst.at(t)).m_k for t in (0.05, 0.1, 0.2, 0.3, 0.4, 0.5)]
    assert all(a >= b * (1 - 1e-7) for a, b in zip(vals, vals[1:]))


def test_probe_agrees_with_full_solve(rng):
    inst = make_instance(rng, K=2, n_active=2)
    m = solve_feasibility(inst).m_k
    for frac, expect in ((0.9, True), (0.999, True), (1.001, False), (1.5, False)):
        v = probe(inst, frac * m)
        assert v.feasible is expect
        assert v.lower <= m * (1 + 1e-7) and v.upper >= m * (1 - 1e-7)
        if expect:
            assert v.result.m_k >= frac * m
    ok, res = check_feasible(inst, 0.5 * m)
    assert ok and res.rank1_value >= 0.5 * m


def test_extract_rank_one_exact(rng):
    inst = make_instance(rng, K=3)
    w0, w1 = random_unit(rng, 3), random_unit(rng, 3)
    e0, e1, _, val = extract_rank1(np.outer(w0, w0.conj()), np.outer(w1, w1.conj()), inst)
    assert abs(np.vdot(e0, w0)) == pytest.approx(1)
    assert abs(np.vdot(e1, w1)) == pytest.approx(1)
    assert val == pytest.approx(rank1_objective(inst, w0, w1)[0])


def test_extract_from_scaled_identity(rng):
    inst = make_instance(rng, K=3, n_active=2)
    relaxed = solve_feasibility(inst).m_k
    W = np.eye(3) / 3
    w0, w1, _, val = extract_rank1(W, W, inst, rng)
    assert np.linalg.norm(w0) == pytest.approx(1) and np.linalg.norm(w1) == pytest.approx(1)
    assert val <= relaxed * (1 + 1e-7)


def test_extracted_witness_satisfies_constraints(rng):
    for _ in range(100):
        inst = make_instance(rng, K=int(rng.integers(2, 4)), n_active=int(rng.integers(1, 4)))
        res = solve_feasibility(inst, rng=rng)
        F = inst.enh.f_hat
        s0 = np.abs(F.conj() @ res.w0) ** 2
        s1 = res.s_values[:, 1]
        assert np.linalg.norm(res.w0) <= 1 + 1e-9 and np.linalg.norm(res.w1) <= 1 + 1e-9
        np.testing.assert_allclose(res.s_values[:, 0], s0)
        assert np.all(s1 <= np.abs(F.conj() @ res.w1) ** 2 * (1 + 1e-12))
        q = inst.budget_coeff * s0 - s1
        assert all(lmi_holds(qi + 1e-9 * max(1.0, ci), si, inst.p_t)
                   for qi, si, ci in zip(q, s1, inst.budget_coeff * s0))


def test_oracle_trivial_cases(rng):
    f0 = 10 * crandn(rng, 2)
    enh = EnhancedChannels(f0, np.zeros((0, 2), complex), np.zeros(0, complex))
    inst = FeasibilityInstance.build(enh, LinkBudget(), 0.2)
    target = 2 * np.linalg.norm(f0) ** 2
    few, many = feasibility_oracle(inst, 10, rng), feasibility_oracle(inst, 20_000, rng)
    assert few <= many <= target
    assert many == pytest.approx(target, rel=1e-3)
    scalar = make_instance(rng, K=1, n_active=2)
    assert feasibility_oracle(scalar, 1, rng) == pytest.approx(solve_feasibility(scalar).m_k, rel=1e-6)
    with pytest.raises(DomainError):
        feasibility_oracle(scalar, 0)


def test_instance_validation(rng):
    with pytest.raises(DomainError):
        make_instance(rng, tau=0.0)
    with pytest.raises(DomainError):
        make_instance(rng, tau=0.6)
