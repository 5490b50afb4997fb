"""Dense complex linear algebra kernel.

Thin wrappers around numpy/scipy dense routines with the validation the rest
of the package relies on: Hermiticity/unitarity checks, a Hermitian-generator
fast path for matrix exponentials, and superoperator construction for maps on
vectorized density operators.

Conventions
-----------
* Matrices are ``numpy.ndarray`` with ``complex128`` entries, row-major.
* Density operators are vectorized row-major (``rho.reshape(-1)``), so
  ``vec(A @ rho @ B) = kron(A, B.T) @ vec(rho)``.
* All system matrices are small (<= 256 x 256); no sparse path.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .config import NUMERICS

__all__ = [
    "kron",
    "expm",
    "expm_hermitian_generator",
    "eig_hermitian",
    "is_hermitian",
    "is_unitary",
    "dagger",
    "unitary_superop",
    "lindblad_superop",
    "superop_apply",
    "vec",
    "unvec",
]


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def is_hermitian(a: np.ndarray, tol: float | None = None) -> bool:
    tol = NUMERICS.hermitian_tol if tol is None else tol
    scale = max(np.abs(a).max(), 1.0)
    return np.abs(a - dagger(a)).max() < tol * scale


def is_unitary(a: np.ndarray, tol: float | None = None) -> bool:
    tol = NUMERICS.unitary_tol if tol is None else tol
    d = a.shape[0]
    return np.abs(dagger(a) @ a - np.eye(d)).max() < tol


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product; dimensions multiply."""
    a = np.asarray(a)
    b = np.asarray(b)
    if not (np.all(np.isfinite(a.real)) and np.all(np.isfinite(b.real))):
        raise ValueError("kron requires finite entries")
    return np.kron(a, b)


def expm(a: np.ndarray) -> np.ndarray:
    """Matrix exponential.

    Dispatches to a Hermitian eigendecomposition when the input is
    (anti-)Hermitian, which covers every propagator in the hot path; falls
    back to scipy's scaling-and-squaring Pade otherwise.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expm requires a square matrix")
    scale = max(np.abs(a).max(), 1.0)
    tol = NUMERICS.hermitian_tol * scale
    if np.abs(a - dagger(a)).max() < tol:
        w, v = np.linalg.eigh(a)
        return (v * np.exp(w)) @ dagger(v)
    if np.abs(a + dagger(a)).max() < tol:
        # a = -iH with H Hermitian: exp(a) = V exp(-i w) V^dag
        w, v = np.linalg.eigh(1j * a)
        return (v * np.exp(-1j * w)) @ dagger(v)
    return scipy.linalg.expm(a)


def expm_hermitian_generator(h: np.ndarray, scale: complex = -2j * np.pi) -> np.ndarray:
    """exp(scale * h) for Hermitian h via eigendecomposition.

    The default ``scale`` yields the one-unit-time propagator of a
    frequency-unit Hamiltonian, exp(-2*pi*i*H).
    """
    w, v = np.linalg.eigh(h)
    return (v * np.exp(scale * w)) @ dagger(v)


def eig_hermitian(a: np.ndarray, tol: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix.

    Returns eigenvalues ascending and the matrix whose columns are the
    corresponding orthonormal eigenvectors.  Raises on non-Hermitian input.
    """
    a = np.asarray(a, dtype=complex)
    scale = max(np.abs(a).max(), 1.0)
    tol = NUMERICS.hermitian_tol if tol is None else tol
    if np.abs(a - dagger(a)).max() >= max(tol * scale, 1e-10 * scale):
        raise ValueError("eig_hermitian requires a Hermitian matrix")
    w, v = np.linalg.eigh(a)
    return w, v


def vec(rho: np.ndarray) -> np.ndarray:
    """Row-major vectorization of a density operator."""
    return np.asarray(rho).reshape(-1)


def unvec(x: np.ndarray) -> np.ndarray:
    d = int(round(np.sqrt(x.size)))
    return np.asarray(x).reshape(d, d)


def unitary_superop(u: np.ndarray) -> np.ndarray:
    """Superoperator of rho -> U rho U^dag in the row-major vec convention."""
    return np.kron(u, u.conj())


def lindblad_superop(h: np.ndarray, collapse: list[tuple[float, np.ndarray]]) -> np.ndarray:
    """Liouvillian of drho/dt = -2*pi*i[H, rho] + sum_k rate_k * D[L_k](rho).

    ``h`` is in frequency units (Hz); ``collapse`` holds (rate_Hz, L) pairs
    with D[L](rho) = L rho L^dag - {L^dag L, rho}/2.
    """
    d = h.shape[0]
    eye = np.eye(d)
    lv = -2j * np.pi * (np.kron(h, eye) - np.kron(eye, h.T))
    for rate, op in collapse:
        if rate < 0:
            raise ValueError("collapse rates must be nonnegative")
        if rate == 0.0:
            continue
        opd_op = dagger(op) @ op
        lv += rate * (
            np.kron(op, op.conj())
            - 0.5 * np.kron(opd_op, eye)
            - 0.5 * np.kron(eye, opd_op.T)
        )
    return lv


def superop_apply(s: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return unvec(s @ vec(rho))
