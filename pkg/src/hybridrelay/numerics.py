"""Small complex linear-algebra helpers.

Vectors are 1-D ``complex128`` arrays and Hermitian matrices are square
``complex128`` arrays; nothing here goes beyond dimension ~2K+2.
"""
from __future__ import annotations

import numpy as np

from .errors import DegenerateInputError, StructuralError

HERMITIAN_TOL = 1e-10


def cvec(x) -> np.ndarray:
    v = np.asarray(x, dtype=np.complex128)
    if v.ndim != 1 or v.size == 0:
        raise StructuralError(f"expected a non-empty 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise StructuralError("vector has non-finite entries")
    return v


def hdot(a, b) -> complex:
    """Return a^H b (conjugating the first argument)."""
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if a.shape != b.shape or a.ndim != 1:
        raise StructuralError(f"hdot dimension mismatch: {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b))


def unit_align(f) -> np.ndarray:
    f = np.asarray(f, dtype=np.complex128)
    nrm = np.linalg.norm(f)
    if nrm == 0.0:
        raise DegenerateInputError("cannot align to a zero vector")
    return f / nrm


def check_hermitian(M, tol: float = HERMITIAN_TOL) -> np.ndarray:
    M = np.asarray(M, dtype=np.complex128)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise StructuralError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise StructuralError("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    if np.max(np.abs(M - M.conj().T), initial=0.0) > tol * scale:
        raise StructuralError("matrix is not Hermitian")
    return M


def is_psd(M, tol: float = 1e-9) -> bool:
    M = check_hermitian(M)
    return bool(np.linalg.eigvalsh(M)[0] >= -tol)


def canonical_phase(v: np.ndarray) -> np.ndarray:
    """Rotate v so that its largest-magnitude entry is real and nonnegative."""
    k = int(np.argmax(np.abs(v)))
    if v[k] == 0:
        return v
    return v * (np.conj(v[k]) / abs(v[k]))


def principal_eigvec(M) -> tuple[float, np.ndarray]:
    """Largest eigenpair of a Hermitian matrix, eigenvector phase canonicalized."""
    M = check_hermitian(M)
    w, V = np.linalg.eigh(0.5 * (M + M.conj().T))
    return float(w[-1]), canonical_phase(V[:, -1])


def random_unit(rng: np.random.Generator, k: int) -> np.ndarray:
    """Uniform draw from the complex unit sphere in C^k."""
    z = rng.standard_normal(k) + 1j * rng.standard_normal(k)
    return z / np.linalg.norm(z)
