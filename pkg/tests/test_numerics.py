import numpy as np
import pytest
from hypothesis import given, strategies as st

from hybridrelay.errors import DegenerateInputError, StructuralError
from hybridrelay.numerics import (canonical_phase, check_hermitian, cvec, hdot, is_psd,
                                  principal_eigvec, random_unit, unit_align)

from conftest import crandn


def test_hdot_orthogonal_pair():
    assert hdot([1, 1j], [1, -1j]) == 0


def test_hdot_squared_norm():
    assert hdot([3, 4j], [3, 4j]) == pytest.approx(25)


def test_hdot_matches_hand_expansion(rng):
    a, b = crandn(rng, 3), crandn(rng, 3)
    expect = sum(complex(a[i].real, -a[i].imag) * b[i] for i in range(3))
    assert abs(hdot(a, b) - expect) < 1e-14


def test_hdot_mismatch():
    with pytest.raises(StructuralError):
        hdot([1, 2], [1, 2, 3])


def test_unit_align_example():
    np.testing.assert_allclose(unit_align([3, 4j]), [0.6, 0.8j])


def test_unit_align_idempotent(rng):
    u = random_unit(rng, 4)
    np.testing.assert_allclose(unit_align(u), u)


@given(st.integers(1, 6), st.integers(0, 2**31))
def test_unit_align_attains_cauchy_schwarz(k, seed):
    f = crandn(np.random.default_rng(seed), k)
    u = unit_align(f)
    assert abs(hdot(u, f)) == pytest.approx(np.linalg.norm(f), rel=1e-12)


def test_unit_align_zero():
    with pytest.raises(DegenerateInputError):
        unit_align(np.zeros(3))


def test_is_psd_examples(rng):
    assert not is_psd(np.array([[1, 2], [2, 1]]))
    assert is_psd(np.eye(3))
    w = crandn(rng, 4)
    assert is_psd(np.outer(w, w.conj()))


def test_is_psd_rejects_non_hermitian():
    with pytest.raises(StructuralError):
        is_psd(np.array([[1, 2], [0, 1]]))


def test_principal_eigvec_diag():
    lam, v = principal_eigvec(np.diag([3.0, 1.0, 2.0]))
    assert lam == pytest.approx(3)
    np.testing.assert_allclose(np.abs(v), [1, 0, 0], atol=1e-12)


def test_principal_eigvec_rank_one(rng):
    w = random_unit(rng, 3)
    lam, v = principal_eigvec(np.outer(w, w.conj()))
    assert lam == pytest.approx(1)
    assert abs(hdot(v, w)) == pytest.approx(1)
    np.testing.assert_allclose(v, canonical_phase(w), atol=1e-10)


def _power_iteration(M, iters=2000):
    # shift keeps the top eigenvalue dominant in magnitude
    shift = np.abs(M).sum() + 1.0
    A = M + shift * np.eye(len(M))
    v = np.ones(len(M), dtype=complex)
    for _ in range(iters):
        v = A @ v
        v /= np.linalg.norm(v)
    return float(np.real(np.vdot(v, M @ v))), v


def test_principal_eigvec_against_power_iteration(rng):
    for _ in range(20):
        X = crandn(rng, 3, 3)
        M = X + X.conj().T
        lam, v = principal_eigvec(M)
        assert np.linalg.norm(M @ v - lam * v) < 1e-8
        lam_pi, v_pi = _power_iteration(M)
        assert lam == pytest.approx(lam_pi, abs=1e-6)


def test_check_hermitian_shapes():
    with pytest.raises(StructuralError):
        check_hermitian(np.ones((2, 3)))
    with pytest.raises(StructuralError):
        check_hermitian(np.array([[np.nan, 0], [0, 1]]))


def test_cvec_rejects_bad_input():
    with pytest.raises(StructuralError):
        cvec([])
    with pytest.raises(StructuralError):
        cvec([[1, 2]])
    with pytest.raises(StructuralError):
        cvec([1, np.inf])


def test_random_unit_norm(rng):
    for k in (1, 3, 7):
        assert np.linalg.norm(random_unit(rng, k)) == pytest.approx(1)
