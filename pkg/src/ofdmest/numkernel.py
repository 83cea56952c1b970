"""
Complex numerical primitives used by every other module.

All transforms use the unitary convention: both the forward and the
inverse DFT carry a 1/sqrt(N) factor, so ``dft`` preserves the Euclidean
norm.  A frequency response of a tap vector is the *unnormalized* DFT of the
zero-padded taps, i.e. ``sqrt(N) * dft(h_pad)``; see
:func:`ofdmest.channel.frequency_response`.

Dense decompositions are delegated to LAPACK through numpy/scipy; the
contracts (ordering, residual bounds, conditioning gate) live here.
"""

import numpy as np
import scipy.linalg
import scipy.special

from .errors import SolveError

#: Matrices with a 2-norm condition number above this are rejected by
#: :func:`hermitian_solve`.
COND_LIMIT = 1e8

_HERMITIAN_TOL = 1e-10


def _as_finite(a, name: str) -> np.ndarray:
    a = np.asarray(a)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def dft(x, inverse: bool = False) -> np.ndarray:
    """Unitary DFT along the last axis.

    Parameters
    ----------
    x : array_like
        Complex input; the transform runs along the last axis.
    inverse : bool
        Compute the inverse transform instead of the forward one.

    Returns
    -------
    np.ndarray
        Complex array with the same shape as `x`.
    """
    x = np.asarray(x, dtype=complex)
    if x.ndim == 0 or x.shape[-1] == 0:
        raise ValueError("dft needs a non-empty input")
    if inverse:
        return np.fft.ifft(x, norm="ortho")
    return np.fft.fft(x, norm="ortho")


def dft_matrix(n: int) -> np.ndarray:
    """Unitary DFT matrix ``F`` with ``F @ x == dft(x)``."""
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def is_hermitian(a: np.ndarray, tol: float = _HERMITIAN_TOL) -> bool:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    scale = np.linalg.norm(a)
    return bool(np.linalg.norm(a - a.conj().T) <= tol * max(scale, 1e-300))


def hermitian_solve(a, b) -> np.ndarray:
    """Solve ``a @ x = b`` for Hermitian `a`.

    `b` may be a vector or a matrix of right-hand sides.

    Raises
    ------
    SolveError
        If `a` is singular or its condition number exceeds
        :data:`COND_LIMIT`.
    """
    a = _as_finite(a, "a").astype(complex)
    b = _as_finite(b, "b")
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if b.shape[0] != a.shape[0]:
        raise ValueError(
            f"dimension mismatch: a is {a.shape}, b has {b.shape[0]} rows")
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SolveError(f"matrix condition number {cond:.3g} exceeds {COND_LIMIT:g}")
    try:
        return scipy.linalg.solve(a, b, assume_a="her", check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SolveError(str(exc)) from exc


def svd_decompose(a):
    """Singular value decomposition ``a = U @ diag(s) @ V^H``.

    Returns
    -------
    U : np.ndarray
        Left singular vectors (orthonormal columns).
    s : np.ndarray
        Singular values, non-negative, sorted descending.
    V : np.ndarray
        Right singular vectors (orthonormal columns).  Note this is ``V``,
        not ``V^H``.
    """
    a = _as_finite(a, "a")
    if a.ndim != 2:
        raise ValueError("svd_decompose expects a 2-D matrix")
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    return u, s, vh.conj().T


def eig_hermitian(a):
    """Eigendecomposition of a Hermitian matrix.

    Returns
    -------
    w : np.ndarray
        Real eigenvalues in ascending order.
    v : np.ndarray
        Unit-norm eigenvectors as columns, ``a @ v[:, i] = w[i] * v[:, i]``.

    Raises
    ------
    ValueError
        If `a` is not Hermitian to a relative tolerance of 1e-10.
    """
    a = _as_finite(a, "a")
    if not is_hermitian(a):
        raise ValueError("eig_hermitian expects a Hermitian matrix")
    return np.linalg.eigh(a)


def bessel_j0(x):
    """Bessel function of the first kind, order zero."""
    return scipy.special.j0(x)
