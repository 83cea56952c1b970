"""
Pilot-aided estimators: LS, LMS, MMSE, LMMSE, low-rank LMMSE, ML projection,
plus comb interpolation and scale resolution for blind estimates.

Conventions
-----------
``H[k] = sum_l h_l exp(-2j pi k d_l / N)`` is the unnormalized DFT of the
taps, so with unit-power taps ``E|H[k]|^2 = 1`` and the frequency-domain
noise variance equals the per-sample time-domain variance.  The channel
correlation is therefore ``R_HH = E[H H^H] = F diag(sigma_l^2) F^H`` with
``F[k, l] = exp(-2j pi k d_l / N)``.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..channel import PowerDelayProfile
from ..numkernel import dft, eig_hermitian, hermitian_solve, svd_decompose

# eigenvalues below this fraction of the largest are treated as exact zeros
_NULL_EIG = 1e-12


@dataclass(frozen=True)
class ChannelEstimate:
    """Estimated frequency response, ``n_symbols x N``."""

    h_hat: np.ndarray
    method: str
    per_symbol_valid: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.h_hat)):
            raise ValueError("channel estimate contains non-finite entries")
        if self.per_symbol_valid.shape != (self.h_hat.shape[0],):
            raise ValueError("per_symbol_valid must have one flag per symbol")


@dataclass(frozen=True)
class FreqCorrelation:
    """Frequency-domain channel correlation with its operating SNR.

    `snr` is linear (``E|x|^2 / sigma^2``); ``np.inf`` means noiseless.
    """

    R_HH: np.ndarray
    snr: float
    beta: float = 1.0

    def __post_init__(self):
        if self.beta < 1.0 - 1e-12:
            raise ValueError("beta must be >= 1")
        if not self.snr > 0:
            raise ValueError("snr must be positive")

    @property
    def regularization(self) -> float:
        return 0.0 if np.isinf(self.snr) else self.beta / self.snr

    @classmethod
    def from_pdp(cls, pdp: PowerDelayProfile, n_fft: int, snr: float,
                 beta: float = 1.0, positions=None) -> "FreqCorrelation":
        """Genie correlation from a known delay profile.

        With `positions`, the correlation is restricted to those subcarriers.
        """
        f = tap_matrix(n_fft, pdp.delays, positions)
        r = (f * np.asarray(pdp.powers)) @ f.conj().T
        return cls(r, snr, beta)

    @classmethod
    def from_samples(cls, h_samples, snr: float, beta: float = 1.0,
                     noise_var: float = 0.0) -> "FreqCorrelation":
        """Sample correlation of (noisy) channel snapshots, one per row.

        `noise_var` is subtracted from the diagonal and the result is clipped
        to the nearest positive semi-definite matrix.
        """
        h = np.asarray(h_samples, dtype=complex)
        r = h.T @ h.conj() / h.shape[0]
        r = (r + r.conj().T) / 2 - noise_var * np.eye(r.shape[0])
        w, v = eig_hermitian(r)
        r = (v * np.clip(w, 0.0, None)) @ v.conj().T
        return cls((r + r.conj().T) / 2, snr, beta)


def tap_matrix(n_fft: int, delays, positions=None) -> np.ndarray:
    """``F[k, l] = exp(-2j pi k d_l / N)`` for the requested subcarriers."""
    k = np.arange(n_fft) if positions is None else np.asarray(positions)
    return np.exp(-2j * np.pi * np.outer(k, np.asarray(delays)) / n_fft)


def estimate_ls(Y, X) -> np.ndarray:
    """Elementwise ``Y / X``."""
    Y = np.asarray(Y, dtype=complex)
    X = np.asarray(X, dtype=complex)
    if Y.shape != X.shape:
        raise ValueError(f"shape mismatch: {Y.shape} vs {X.shape}")
    if np.any(X == 0):
        raise ValueError("zero pilot symbol: LS estimate undefined")
    return Y / X


def track_lms(ys, xs, step: float, initial=None) -> np.ndarray:
    """One-tap LMS tracker per pilot subcarrier.

    Parameters
    ----------
    ys, xs : array_like
        ``(n_symbols, n_pilots)`` received and transmitted pilot values.
    step : float
        Adaptation step ``mu``; stable while ``mu |x|^2 < 2``.
    initial : array_like, optional
        Starting estimate.  Defaults to the LS estimate of the first row.

    Returns
    -------
    np.ndarray
        Estimates after each row; row 0 is the initial estimate.  The update
        is ``h <- h + mu conj(x) (y - h x)``.
    """
    if step <= 0:
        raise ValueError("LMS step must be positive")
    ys = np.atleast_2d(np.asarray(ys, dtype=complex))
    xs = np.atleast_2d(np.asarray(xs, dtype=complex))
    if ys.shape != xs.shape:
        raise ValueError("ys and xs must have the same shape")
    out = np.empty_like(ys)
    h = estimate_ls(ys[0], xs[0]) if initial is None else np.array(initial, dtype=complex)
    out[0] = h
    for n in range(1, ys.shape[0]):
        # the estimate for symbol n adapts on symbol n-1's error
        h = h + step * np.conj(xs[n - 1]) * (ys[n - 1] - h * xs[n - 1])
        out[n] = h
    return out


def estimate_mmse(Y, X, pdp: PowerDelayProfile, noise_var: float,
                  n_fft: int = None, positions=None) -> np.ndarray:
    """MMSE estimate ``F R_hY R_YY^-1 Y`` of the frequency response.

    ``R_hY = R_hh F^H X^H`` and ``R_YY = X F R_hh F^H X^H + sigma^2 I`` with
    ``R_hh = diag(sigma_l^2)`` over the taps of `pdp`.  The product is
    evaluated in the equivalent tap-domain form
    ``F (F^H X^H X F + sigma^2 R_hh^-1)^-1 F^H X^H Y``, which stays
    well conditioned as ``sigma^2 -> 0`` where ``R_YY`` becomes singular.

    Parameters
    ----------
    Y, X : array_like
        Received and known transmitted values on the observed subcarriers.
    pdp : PowerDelayProfile
        Known delay profile.
    noise_var : float
        Per-subcarrier noise variance.
    n_fft : int, optional
        Transform length; defaults to ``len(Y)``.
    positions : array_like, optional
        Subcarrier indices of `Y`; defaults to ``0..len(Y)-1``.

    Returns
    -------
    np.ndarray
        Estimate at the observed subcarriers.
    """
    Y = np.asarray(Y, dtype=complex)
    X = np.asarray(X, dtype=complex)
    if Y.shape != X.shape or Y.ndim != 1:
        raise ValueError("Y and X must be 1-D and of equal length")
    n_fft = Y.size if n_fft is None else n_fft
    f = tap_matrix(n_fft, pdp.delays, positions)
    a = X[:, None] * f
    gram = a.conj().T @ a + noise_var * np.diag(1.0 / np.asarray(pdp.powers))
    taps = hermitian_solve(gram, a.conj().T @ Y)
    return f @ taps


def _shrink(eigenvalues, reg: float) -> np.ndarray:
    lam = np.clip(np.asarray(eigenvalues, dtype=float), 0.0, None)
    null = lam <= _NULL_EIG * max(lam.max(), 1e-300)
    delta = np.zeros_like(lam)
    delta[~null] = lam[~null] / (lam[~null] + reg)
    return delta


def lmmse_matrix(corr: FreqCorrelation) -> np.ndarray:
    """Smoothing matrix ``R (R + beta/SNR I)^-1``.

    Built from the eigendecomposition of ``R`` so the noiseless limit is the
    projector onto the range of ``R`` instead of an ill-posed inverse.
    """
    w, v = eig_hermitian(corr.R_HH)
    return (v * _shrink(w, corr.regularization)) @ v.conj().T


def estimate_lmmse(h_ls, corr: FreqCorrelation) -> np.ndarray:
    return lmmse_matrix(corr) @ np.asarray(h_ls, dtype=complex)


def lowrank_matrix(corr: FreqCorrelation, rank: int) -> np.ndarray:
    """``U diag(delta_0..delta_{p-1}, 0, ...) U^H`` from the SVD of ``R``."""
    n = corr.R_HH.shape[0]
    if not 1 <= rank <= n:
        raise ValueError(f"rank must be in [1, {n}], got {rank}")
    u, s, _ = svd_decompose(corr.R_HH)
    delta = _shrink(s, corr.regularization)[:rank]
    up = u[:, :rank]
    return (up * delta) @ up.conj().T


def estimate_lowrank(h_ls, corr: FreqCorrelation, rank: int) -> np.ndarray:
    return lowrank_matrix(corr, rank) @ np.asarray(h_ls, dtype=complex)


@lru_cache(maxsize=64)
def _ml_projection_cached(n_fft: int, n_taps: int, positions: tuple) -> np.ndarray:
    k = np.arange(n_fft) if not positions else np.asarray(positions)
    f_h = np.exp(-2j * np.pi * np.outer(k, np.arange(n_taps)) / n_fft) / np.sqrt(n_fft)
    gram = f_h.conj().T @ f_h
    p = f_h @ hermitian_solve(gram, f_h.conj().T)
    p = (p + p.conj().T) / 2
    p.setflags(write=False)
    return p


def ml_projection(n_fft: int, n_taps: int, positions=None) -> np.ndarray:
    """Orthogonal projector onto the span of the first `n_taps` DFT columns.

    With `positions`, only those rows of the DFT matrix are used.  The result
    is cached per ``(n_fft, n_taps, positions)`` and read-only.
    """
    pos = () if positions is None else tuple(int(p) for p in positions)
    n_rows = n_fft if not pos else len(pos)
    if not 1 <= n_taps <= n_rows:
        raise ValueError(f"n_taps must be in [1, {n_rows}], got {n_taps}")
    return _ml_projection_cached(n_fft, n_taps, pos)


def estimate_ml(y_freq, n_taps: int, cp_length: int = None,
                n_fft: int = None, positions=None) -> np.ndarray:
    """Project the observation onto the channel signal subspace.

    ``y_freq`` is the per-subcarrier observation with unit symbols (for
    instance an LS estimate).  When `cp_length` is given, ``n_taps`` must
    not exceed it.
    """
    y = np.asarray(y_freq, dtype=complex)
    if cp_length is not None and not 1 <= n_taps <= cp_length:
        raise ValueError(f"n_taps must be in [1, cp_length={cp_length}], got {n_taps}")
    n_fft = y.size if n_fft is None else n_fft
    return ml_projection(n_fft, n_taps, positions) @ y


def resolve_scale_ambiguity(h_hat, x: complex, y: complex, subcarrier: int = 0,
                            n_fft: int = None) -> np.ndarray:
    """Fix the complex scale of a blind tap estimate with one known pilot.

    The returned taps ``c * h_hat`` have frequency response ``y / x`` at
    `subcarrier` of an `n_fft`-point transform (default ``len(h_hat)``).
    """
    h_hat = np.asarray(h_hat, dtype=complex)
    if not np.any(h_hat):
        raise ValueError("cannot resolve the scale of an all-zero estimate")
    if x == 0:
        raise ValueError("reference pilot must be non-zero")
    n_fft = h_hat.size if n_fft is None else n_fft
    response = np.sum(h_hat * np.exp(-2j * np.pi * subcarrier * np.arange(h_hat.size) / n_fft))
    if response == 0:
        raise ValueError("estimate has a spectral null at the reference subcarrier")
    return (y / x) / response * h_hat


def interpolate_comb(pilot_estimates, pilot_positions, n_fft: int,
                     method: str = "linear") -> np.ndarray:
    """Fill all `n_fft` subcarriers from uniformly spaced comb estimates.

    ``linear`` interpolates real and imaginary parts piecewise linearly, with
    the segment after the last pilot wrapping to pilot 0 at ``n_fft``.
    ``transform`` maps the ``N_p`` pilots to ``N_p`` time taps, zero-pads to
    ``n_fft`` and transforms back; it is exact for channels with fewer than
    ``N_p`` taps.
    """
    h_p = np.asarray(pilot_estimates, dtype=complex)
    pos = np.asarray(pilot_positions, dtype=int)
    if h_p.shape[-1] != pos.size or pos.size == 0:
        raise ValueError("one estimate per pilot position is required")
    if pos[0] != 0:
        raise ValueError("pilot positions must start at subcarrier 0")
    steps = np.diff(np.concatenate([pos, [n_fft]]))
    if np.any(steps != steps[0]) or steps[0] < 1:
        raise ValueError("pilot positions must be uniformly spaced and divide N")
    if method == "linear":
        k = np.arange(n_fft)
        xp = np.concatenate([pos, [n_fft]])

        def interp(v):
            vp = np.concatenate([v, v[:1]])
            return np.interp(k, xp, vp.real) + 1j * np.interp(k, xp, vp.imag)

        if h_p.ndim == 1:
            return interp(h_p)
        return np.stack([interp(row) for row in h_p])
    if method == "transform":
        n_p = pos.size
        taps = dft(h_p, inverse=True)
        padded = np.zeros(h_p.shape[:-1] + (n_fft,), dtype=complex)
        padded[..., :n_p] = taps
        return dft(padded) * np.sqrt(n_fft / n_p)
    raise ValueError(f"unknown interpolation method {method!r}")


__all__ = [
    "ChannelEstimate", "FreqCorrelation", "tap_matrix",
    "estimate_ls", "track_lms", "estimate_mmse", "lmmse_matrix",
    "estimate_lmmse", "lowrank_matrix", "estimate_lowrank", "ml_projection",
    "estimate_ml", "resolve_scale_ambiguity", "interpolate_comb",
]
