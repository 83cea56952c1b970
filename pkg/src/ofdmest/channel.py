"""
Rayleigh multipath channel with Jakes Doppler statistics.

The channel is a tapped delay line whose taps are held constant for the
duration of one OFDM symbol and change from symbol to symbol (quasi-static
per symbol).  Each tap is an independent sum-of-sinusoids process whose
autocorrelation at lag ``m`` symbols approaches ``sigma_l^2 J0(2 pi fdT m)``.

With a cyclic prefix longer than the largest delay, demodulation yields
``Y(k) = X(k) H(k) + W(k)`` exactly, with ``H`` the unnormalized DFT of the
zero-padded tap vector.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import SolveError
from .numkernel import bessel_j0, hermitian_solve

_POWER_TOL = 1e-12


@dataclass(frozen=True)
class PowerDelayProfile:
    """Integer sample delays and their average powers (summing to one)."""

    delays: tuple
    powers: tuple

    def __post_init__(self):
        delays = tuple(int(d) for d in self.delays)
        powers = tuple(float(p) for p in self.powers)
        object.__setattr__(self, "delays", delays)
        object.__setattr__(self, "powers", powers)
        if not delays or len(delays) != len(powers):
            raise ValueError("delays and powers must be non-empty and equally long")
        if delays[0] < 0 or any(b <= a for a, b in zip(delays, delays[1:])):
            raise ValueError("delays must be non-negative and strictly increasing")
        if any(p <= 0 for p in powers):
            raise ValueError("tap powers must be positive")
        if abs(sum(powers) - 1.0) > _POWER_TOL:
            raise ValueError(f"tap powers must sum to 1, got {sum(powers)!r}")

    @classmethod
    def normalized(cls, delays, powers) -> "PowerDelayProfile":
        powers = np.asarray(powers, dtype=float)
        return cls(tuple(delays), tuple(powers / powers.sum()))

    @classmethod
    def exponential(cls, n_taps: int = 4, decay: float = 2.0) -> "PowerDelayProfile":
        """Taps at delays ``0..n_taps-1`` with powers proportional to ``exp(-d/decay)``."""
        d = np.arange(n_taps)
        return cls.normalized(d, np.exp(-d / decay))

    @classmethod
    def single(cls) -> "PowerDelayProfile":
        return cls((0,), (1.0,))

    @property
    def n_taps(self) -> int:
        return len(self.delays)

    @property
    def max_delay(self) -> int:
        return self.delays[-1]

    def covariance(self, n_fft: int) -> np.ndarray:
        """Zero-padded time-domain tap covariance ``diag(sigma^2)`` (N x N)."""
        r = np.zeros((n_fft, n_fft))
        r[self.delays, self.delays] = self.powers
        return r


@dataclass(frozen=True)
class FadingSpec:
    doppler_rate: float = 0.01
    n_oscillators: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.doppler_rate < 0:
            raise ValueError("doppler_rate must be >= 0")
        if self.n_oscillators < 8:
            raise ValueError("n_oscillators must be >= 8")


@dataclass(frozen=True)
class ChannelRealization:
    """Per-symbol tap gains and the matching frequency response."""

    tap_gains: np.ndarray
    freq_response: np.ndarray
    pdp: PowerDelayProfile

    @property
    def n_symbols(self) -> int:
        return self.tap_gains.shape[0]

    @property
    def n_fft(self) -> int:
        return self.freq_response.shape[1]

    @classmethod
    def from_taps(cls, tap_gains, pdp: PowerDelayProfile, n_fft: int) -> "ChannelRealization":
        """Wrap explicit tap gains (``symbols x taps``) into a realization."""
        taps = np.atleast_2d(np.asarray(tap_gains, dtype=complex))
        if taps.shape[1] != pdp.n_taps:
            raise ValueError("tap gain columns must match the delay profile")
        return cls(taps, frequency_response(taps, pdp.delays, n_fft), pdp)


def frequency_response(taps, delays, n_fft: int) -> np.ndarray:
    """``H[k] = sum_l h_l exp(-2j pi k d_l / N)`` along the last axis.

    Equals ``sqrt(N) * dft(zero_padded_taps)`` in the unitary convention.
    """
    taps = np.asarray(taps, dtype=complex)
    padded = np.zeros(taps.shape[:-1] + (n_fft,), dtype=complex)
    padded[..., list(delays)] = taps
    return np.fft.fft(padded, axis=-1)


def _sos_process(rng: np.random.Generator, doppler_rate: float,
                 n_osc: int, n_symbols: int) -> np.ndarray:
    # Sum of sinusoids with one random rotation of the arrival angles and
    # independent random phases for the in-phase and quadrature branches.
    theta = rng.uniform(-np.pi, np.pi)
    phi_i = rng.uniform(-np.pi, np.pi, n_osc)
    phi_q = rng.uniform(-np.pi, np.pi, n_osc)
    alpha = (2 * np.pi * np.arange(1, n_osc + 1) - np.pi + theta) / (4 * n_osc)
    w = 2 * np.pi * doppler_rate
    out = np.empty(n_symbols, dtype=complex)
    chunk = 8192
    for start in range(0, n_symbols, chunk):
        t = np.arange(start, min(start + chunk, n_symbols))[:, None]
        i = np.cos(w * t * np.cos(alpha) + phi_i).sum(axis=1)
        q = np.cos(w * t * np.sin(alpha) + phi_q).sum(axis=1)
        out[start:start + t.shape[0]] = i + 1j * q
    return out / np.sqrt(n_osc)


def generate_fading(pdp: PowerDelayProfile, spec: FadingSpec, n_symbols: int,
                    n_fft: int) -> ChannelRealization:
    """Draw a time-varying realization of ``n_symbols`` OFDM symbols.

    Every tap gets its own sub-seed derived from ``spec.seed`` so taps are
    independent and a given seed always reproduces the same realization.
    """
    if n_symbols < 1:
        raise ValueError("n_symbols must be >= 1")
    seeds = np.random.SeedSequence(spec.seed).spawn(pdp.n_taps)
    taps = np.empty((n_symbols, pdp.n_taps), dtype=complex)
    for l, (ss, power) in enumerate(zip(seeds, pdp.powers)):
        rng = np.random.default_rng(ss)
        taps[:, l] = np.sqrt(power) * _sos_process(
            rng, spec.doppler_rate, spec.n_oscillators, n_symbols)
    return ChannelRealization.from_taps(taps, pdp, n_fft)


def complex_noise(rng: np.random.Generator, shape, noise_var: float) -> np.ndarray:
    """Circular complex white Gaussian noise with per-sample variance `noise_var`."""
    if noise_var == 0:
        return np.zeros(shape, dtype=complex)
    scale = np.sqrt(noise_var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _check_delays(pdp: PowerDelayProfile, cp_length: int):
    if pdp.max_delay >= cp_length:
        raise ValueError(
            f"channel delay {pdp.max_delay} must be shorter than the cyclic "
            f"prefix ({cp_length} samples)")


def apply_channel(tx, real: ChannelRealization, symbol_index: int,
                  noise_var: float, noise_seed: int) -> np.ndarray:
    """Pass one CP-extended symbol through the symbol's tap vector plus AWGN.

    The linear convolution is truncated to the input length; the tail that
    would spill into the next symbol is discarded (see :func:`propagate` for
    the continuous-stream version).
    """
    tx = np.asarray(tx, dtype=complex)
    _check_delays(real.pdp, tx.size - real.n_fft)
    taps = real.tap_gains[symbol_index]
    out = np.zeros_like(tx)
    for gain, d in zip(taps, real.pdp.delays):
        out[d:] += gain * tx[:tx.size - d]
    rng = np.random.default_rng(noise_seed)
    return out + complex_noise(rng, out.shape, noise_var)


def propagate(tx_rows, real: ChannelRealization, noise_var: float,
              rng: np.random.Generator) -> np.ndarray:
    """Continuous transmission of consecutive CP-extended symbols.

    Symbol ``n`` is convolved with the taps of symbol ``n`` and its tail
    lands in the cyclic prefix of symbol ``n + 1``.

    Parameters
    ----------
    tx_rows : np.ndarray
        ``(n_symbols, N + N_g)`` time-domain symbols.
    real : ChannelRealization
        Must cover at least ``n_symbols`` symbols.
    noise_var : float
        Per-sample noise variance.
    rng : np.random.Generator
        Noise source.
    """
    tx_rows = np.asarray(tx_rows, dtype=complex)
    n_sym, k = tx_rows.shape
    _check_delays(real.pdp, k - real.n_fft)
    stream = tx_rows.ravel()
    out = np.zeros_like(stream)
    for l, d in enumerate(real.pdp.delays):
        g = np.repeat(real.tap_gains[:n_sym, l], k) * stream
        if d:
            out[d:] += g[:-d]
        else:
            out += g
    out += complex_noise(rng, out.shape, noise_var)
    return out.reshape(n_sym, k)


def convolve_stream(samples, taps) -> np.ndarray:
    """Static FIR channel on a sample stream, truncated to the input length."""
    samples = np.asarray(samples, dtype=complex)
    return np.convolve(samples, np.asarray(taps, dtype=complex))[:samples.size]


def snr_to_noise_var(snr_db: float, signal_power: float = 1.0) -> float:
    if signal_power <= 0:
        raise ValueError("signal_power must be positive")
    return signal_power / 10.0 ** (snr_db / 10.0)


def jakes_correlation(doppler_rate: float) -> Callable:
    """``m -> J0(2 pi fdT m)``."""
    return lambda m: float(bessel_j0(2 * np.pi * doppler_rate * m))


def empirical_autocorrelation(tap_gains, max_lag: int) -> np.ndarray:
    """Time-averaged tap autocorrelation, pooled over taps, normalized at lag 0.

    ``r(m) = sum_l <h_l(n + m) h_l(n)^*>_n / sum_l <|h_l(n)|^2>_n`` for
    ``m = 0 .. max_lag``.  Returns complex values; the real part is the
    quantity compared with ``J0``.
    """
    h = np.asarray(tap_gains, dtype=complex)
    if h.ndim == 1:
        h = h[:, None]
    n = h.shape[0]
    if not 0 <= max_lag < n:
        raise ValueError("max_lag must be in [0, n_symbols)")
    out = np.array([np.sum(h[m:] * np.conj(h[:n - m])) / (n - m)
                    for m in range(max_lag + 1)])
    if out[0].real <= 0:
        raise ValueError("all-zero tap process")
    return out / out[0].real


@dataclass(frozen=True)
class ArModel:
    """``H(n) = -sum_i a_i H(n-i) + sigma u(n)`` with unit-variance white ``u``."""

    coefficients: np.ndarray = field(repr=True)
    innovation_var: float

    @property
    def order(self) -> int:
        return len(self.coefficients)

    @property
    def poles(self) -> np.ndarray:
        return np.roots(np.concatenate([[1.0], self.coefficients]))

    @property
    def is_stable(self) -> bool:
        return bool(np.all(np.abs(self.poles) < 1.0))

    def companion(self) -> np.ndarray:
        """State transition matrix for ``x = [H(n), ..., H(n-p+1)]``."""
        p = self.order
        c = np.zeros((p, p), dtype=complex)
        c[0, :] = -np.asarray(self.coefficients)
        c[1:, :-1] += np.eye(p - 1)
        return c


def fit_ar_yule_walker(correlation: Callable, order: int,
                       loading: float = 0.0) -> ArModel:
    """Fit an AR(`order`) model to an autocorrelation function.

    Solves the Toeplitz system ``R a = -[r(1), ..., r(p)]`` with
    ``R[i, j] = r(|i - j|)``.  `loading` adds ``loading * r(0)`` to the
    diagonal of ``R`` (and to ``r(0)`` in the innovation variance), which
    keeps the system solvable for an almost constant process.

    Raises
    ------
    SolveError
        If the Toeplitz matrix is singular or ill-conditioned.
    """
    if order < 1:
        raise ValueError("AR order must be >= 1")
    r = np.array([correlation(m) for m in range(order + 1)], dtype=complex)
    if r[0].real <= 0:
        raise ValueError("correlation(0) must be positive")
    r0 = r[0] * (1.0 + loading)
    idx = np.arange(order)
    lag = idx[:, None] - idx[None, :]
    toeplitz = np.where(lag >= 0, r[np.abs(lag)], np.conj(r[np.abs(lag)]))
    toeplitz[idx, idx] = r0
    a = hermitian_solve(toeplitz, -r[1:])
    sigma2 = float(np.real(r0 + np.dot(a, np.conj(r[1:]))))
    if sigma2 <= 0:
        raise SolveError(f"non-positive innovation variance {sigma2:g}")
    if np.allclose(a.imag, 0):
        a = a.real
    a.setflags(write=False)
    return ArModel(a, sigma2)
