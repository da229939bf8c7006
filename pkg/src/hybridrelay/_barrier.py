"""Log-barrier Newton kernel for the relaxed beamforming feasibility problem.

Decision vector z = [x0, x1, s] where x0, x1 are real coordinates of two
Hermitian K x K matrices in the basis returned by :func:`hermitian_basis` and
s holds the per-relay second-hop terms divided by ||f_n||^2.

    maximize    a0 . x1 + sum_n sig_n s_n
    subject to  W(x0), W(x1) PSD,  tr W <= 1,
                A_n . x1 - s_n >= 0,
                c_n A_n . x0 - s_n - p sig_n s_n^2 >= 0.
"""
from __future__ import annotations

import numba as nb
import numpy as np

STATUS_OPTIMAL = 0
STATUS_FEASIBLE = 1  # objective reached the requested target
STATUS_INFEASIBLE = 2  # dual bound fell below the target
STATUS_STALLED = 3


def hermitian_basis(K: int) -> np.ndarray:
    d = K * K
    E = np.zeros((d, K, K), dtype=np.complex128)
    k = 0
    for i in range(K):
        E[k, i, i] = 1.0
        k += 1
    for i in range(K):
        for j in range(i + 1, K):
            E[k, i, j] = E[k, j, i] = 1.0
            k += 1
    for i in range(K):
        for j in range(i + 1, K):
            E[k, i, j] = 1j
            E[k, j, i] = -1j
            k += 1
    return E


def to_coords(W: np.ndarray) -> np.ndarray:
    K = W.shape[0]
    x = [W[i, i].real for i in range(K)]
    x += [W[i, j].real for i in range(K) for j in range(i + 1, K)]
    x += [W[i, j].imag for i in range(K) for j in range(i + 1, K)]
    return np.array(x)


def quad_coords(E: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Real vector a with a . x = v^H W(x) v."""
    return np.real(np.einsum("i,kij,j->k", v.conj(), E, v))


def basis_entries(K: int):
    """Sparse form of the basis: E_k = sum_e coef[k, e] * unit(row[k, e], col[k, e])."""
    d = K * K
    row = np.zeros((d, 2), dtype=np.int64)
    col = np.zeros((d, 2), dtype=np.int64)
    coef = np.zeros((d, 2), dtype=np.complex128)
    k = 0
    for i in range(K):
        row[k] = i
        col[k] = i
        coef[k, 0] = 1.0
        k += 1
    for kind in (1.0, 1j):
        for i in range(K):
            for j in range(i + 1, K):
                row[k] = (i, j)
                col[k] = (j, i)
                coef[k] = (kind, np.conj(kind))
                k += 1
    return row, col, coef


@nb.njit(cache=True)
def _assemble(x, K):
    W = np.zeros((K, K), dtype=np.complex128)
    k = 0
    for i in range(K):
        W[i, i] = x[k]
        k += 1
    n_off = K * (K - 1) // 2
    for i in range(K):
        for j in range(i + 1, K):
            v = x[k] + 1j * x[k + n_off]
            W[i, j] = v
            W[j, i] = np.conj(v)
            k += 1
    return W


@nb.njit(cache=True)
def _chol_logdet_inv(W):
    """Cholesky of a Hermitian matrix; returns (ok, logdet, inverse)."""
    K = W.shape[0]
    L = np.zeros((K, K), dtype=np.complex128)
    logdet = 0.0
    for j in range(K):
        acc = W[j, j].real
        for k in range(j):
            acc -= (L[j, k] * np.conj(L[j, k])).real
        if acc <= 0.0:
            return False, 0.0, L
        ljj = np.sqrt(acc)
        L[j, j] = ljj
        logdet += 2.0 * np.log(ljj)
        for i in range(j + 1, K):
            v = W[i, j]
            for k in range(j):
                v -= L[i, k] * np.conj(L[j, k])
            L[i, j] = v / ljj
    # inverse of L (lower triangular), then W^-1 = L^-H L^-1
    Li = np.zeros((K, K), dtype=np.complex128)
    for i in range(K):
        Li[i, i] = 1.0 / L[i, i]
        for j in range(i):
            v = 0.0 + 0.0j
            for k in range(j, i):
                v -= L[i, k] * Li[k, j]
            Li[i, j] = v / L[i, i]
    G = np.conj(Li.T) @ Li
    return True, logdet, G


@nb.njit(cache=True)
def _barrier_value(K, tr, A, sig, c, p, cobj, z, tpar):
    d = K * K
    m = A.shape[0]
    x0 = z[:d]
    x1 = z[d:2 * d]
    s = z[2 * d:]
    ok0, ld0, _ = _chol_logdet_inv(_assemble(x0, K))
    ok1, ld1, _ = _chol_logdet_inv(_assemble(x1, K))
    if not (ok0 and ok1):
        return np.inf
    g1 = 1.0 - np.dot(tr, x0)
    g2 = 1.0 - np.dot(tr, x1)
    if g1 <= 0.0 or g2 <= 0.0:
        return np.inf
    val = -tpar * np.dot(cobj, z) - ld0 - ld1 - np.log(g1) - np.log(g2)
    for n in range(m):
        h1 = np.dot(A[n], x1) - s[n]
        h2 = c[n] * np.dot(A[n], x0) - s[n] - p * sig[n] * s[n] * s[n]
        if h1 <= 0.0 or h2 <= 0.0:
            return np.inf
        val -= np.log(h1) + np.log(h2)
    return val


@nb.njit(cache=True)
def _grad_hess(K, brow, bcol, bcoef, tr, A, sig, c, p, cobj, z, tpar):
    d = K * K
    m = A.shape[0]
    nv = 2 * d + m
    g = -tpar * cobj
    H = np.zeros((nv, nv))
    for blk in range(2):
        off = blk * d
        x = z[off:off + d]
        _, _, G = _chol_logdet_inv(_assemble(x, K))
        # E_k = sum_e coef e_row e_col^T, so tr(G E_k) = sum_e coef G[col, row] and
        # tr(G E_k G E_l) = sum_{e,f} coef_e coef_f G[col_e, row_f] G[col_f, row_e]
        for k in range(d):
            acc = 0.0
            for e in range(2):
                acc += (bcoef[k, e] * G[bcol[k, e], brow[k, e]]).real
            g[off + k] -= acc
            for l in range(k, d):
                h = 0.0
                for e in range(2):
                    ce = bcoef[k, e]
                    if ce == 0:
                        continue
                    for f in range(2):
                        cf = bcoef[l, f]
                        if cf == 0:
                            continue
                        h += (ce * cf * G[bcol[k, e], brow[l, f]] * G[bcol[l, f], brow[k, e]]).real
                H[off + k, off + l] += h
                if l != k:
                    H[off + l, off + k] += h
        gg = 1.0 - np.dot(tr, x)
        for k in range(d):
            if tr[k] == 0.0:
                continue
            g[off + k] += tr[k] / gg
            for l in range(d):
                H[off + k, off + l] += tr[k] * tr[l] / (gg * gg)
    x0 = z[:d]
    x1 = z[d:2 * d]
    for n in range(m):
        i_s = 2 * d + n
        sn = z[i_s]
        an = A[n]
        # A_n . x1 - s_n >= 0
        h = np.dot(an, x1) - sn
        inv = 1.0 / h
        inv2 = inv * inv
        for k in range(d):
            g[d + k] -= an[k] * inv
            for l in range(d):
                H[d + k, d + l] += an[k] * an[l] * inv2
            H[d + k, i_s] -= an[k] * inv2
            H[i_s, d + k] -= an[k] * inv2
        g[i_s] += inv
        H[i_s, i_s] += inv2
        # c_n A_n . x0 - s_n - p sig_n s_n^2 >= 0
        h = c[n] * np.dot(an, x0) - sn - p * sig[n] * sn * sn
        inv = 1.0 / h
        inv2 = inv * inv
        ds = -1.0 - 2.0 * p * sig[n] * sn
        cn = c[n]
        for k in range(d):
            g[k] -= cn * an[k] * inv
            for l in range(d):
                H[k, l] += cn * cn * an[k] * an[l] * inv2
            H[k, i_s] += cn * an[k] * ds * inv2
            H[i_s, k] += cn * an[k] * ds * inv2
        g[i_s] -= ds * inv
        H[i_s, i_s] += ds * ds * inv2 + 2.0 * p * sig[n] * inv
    return g, H


@nb.njit(cache=True)
def barrier_solve(K, brow, bcol, bcoef, tr, a0, A, sig, c, p, ub, offset, rel_tol, target, max_newton, mu=16.0, center_tol=1e-9):
    """Path-following barrier method.

    ``offset`` is the constant added to the scaled objective before applying the
    relative tolerance (so the stopping rule is relative to the full value).
    ``target`` is a scaled objective level for early exit; pass np.nan to solve
    to optimality.
    Returns (status, z, objective_scaled, barrier_t, newton_steps).
    """
    d = K * K
    m = A.shape[0]
    nv = 2 * d + m
    cobj = np.zeros(nv)
    cobj[d:2 * d] = a0 / ub
    for n in range(m):
        cobj[2 * d + n] = sig[n] / ub
    z = np.zeros(nv)
    z[:d] = tr / (2.0 * K)
    z[d:2 * d] = tr / (2.0 * K)
    for n in range(m):
        z[2 * d + n] = -0.5 / (p * sig[n])
    nb_terms = 2.0 * K + 2.0 + 2.0 * m
    tpar = nb_terms
    steps = 0
    check = not np.isnan(target)
    while True:
        centered = False
        for _ in range(60):
            g, H = _grad_hess(K, brow, bcol, bcoef, tr, A, sig, c, p, cobj, z, tpar)
            dz = np.linalg.solve(H, -g)
            lam2 = -np.dot(g, dz)
            steps += 1
            if lam2 < center_tol:
                centered = True
                break
            f0 = _barrier_value(K, tr, A, sig, c, p, cobj, z, tpar)
            st = 1.0
            while True:
                zn = z + st * dz
                fn = _barrier_value(K, tr, A, sig, c, p, cobj, zn, tpar)
                if fn <= f0 - 0.25 * st * lam2:
                    break
                st *= 0.5
                if st < 1e-14:
                    break
            if st < 1e-14:
                return STATUS_STALLED, z, np.dot(cobj, z), tpar, steps
            z = zn
            if check and np.dot(cobj, z) >= target:
                return STATUS_FEASIBLE, z, np.dot(cobj, z), tpar, steps
            if steps >= max_newton:
                return STATUS_STALLED, z, np.dot(cobj, z), tpar, steps
        obj = np.dot(cobj, z)
        gap = nb_terms / tpar
        if check and centered and obj + 1.01 * gap < target:
            return STATUS_INFEASIBLE, z, obj, tpar, steps
        if gap <= rel_tol * (obj + offset):
            return STATUS_OPTIMAL, z, obj, tpar, steps
        tpar *= mu
