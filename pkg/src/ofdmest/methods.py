"""
Estimator registry: turns one received frame into a :class:`ChannelEstimate`
for every method tag the harness knows about.

Block pilots: each pilot symbol is estimated on all subcarriers and the
estimate is held over the following data symbols.  Comb pilots: every
symbol is estimated on the pilot subcarriers and interpolated to the rest.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .channel import FadingSpec, generate_fading, jakes_correlation, complex_noise
from .config import METHOD_PARAMS, SweepConfig
from .estimators import (ChannelEstimate, FreqCorrelation, estimate_ls,
                         estimate_mmse, init_scalar_kalman, init_vector_kalman,
                         interpolate_comb, kalman_predict, kalman_step_scalar,
                         kalman_step_vector, lmmse_matrix, lowrank_matrix,
                         ml_projection, track_lms)
from .modem import Frame, hard_decision


@dataclass
class Observation:
    """Everything a receiver may use for one trial.

    `truth` is only read by the perfect-CSI reference.
    """

    cfg: SweepConfig
    frame: Frame
    Y: np.ndarray
    noise_var: float
    truth: np.ndarray
    prelude_rng: np.random.Generator = None

    @property
    def snr(self) -> float:
        return np.inf if self.noise_var == 0 else 1.0 / self.noise_var

    @property
    def n_fft(self) -> int:
        return self.cfg.ofdm.n_subcarriers


DESCRIPTIONS = {
    "perfect": "perfect channel knowledge (reference)",
    "ls": "least squares Y/X at pilots",
    "lms": "one-tap LMS tracker per pilot subcarrier",
    "mmse": "MMSE with known delay profile and pilot symbols",
    "lmmse": "simplified LMMSE R(R + beta/SNR I)^-1 h_ls",
    "lowrank": "rank-p LMMSE from the SVD of the channel correlation",
    "ml": "projection on the first n_taps DFT columns",
    "kalman": "AR(p) Kalman tracker (scalar per subcarrier or vector)",
}


def _pilot_rows(obs: Observation) -> np.ndarray:
    return np.flatnonzero(obs.frame.pilot_mask.all(axis=1))


def _observed(obs: Observation):
    """Rows, subcarrier positions (None = all) and the LS estimates there."""
    kind = obs.cfg.ofdm.pilots.kind
    grid = obs.frame.grid
    if kind == "block":
        rows = _pilot_rows(obs)
        return rows, None, estimate_ls(obs.Y[rows], grid[rows])
    if kind == "comb":
        pos = obs.cfg.ofdm.pilots.positions(obs.n_fft)
        rows = np.arange(obs.frame.n_symbols)
        return rows, pos, estimate_ls(obs.Y[:, pos], grid[:, pos])
    raise ValueError("method needs pilots")


def _expand(obs: Observation, rows, positions, est) -> ChannelEstimate:
    """Interpolate comb estimates and hold block estimates between pilot rows."""
    n_sym = obs.frame.n_symbols
    if positions is not None:
        est = interpolate_comb(est, positions, obs.n_fft, obs.cfg.interpolation)
    latest = np.searchsorted(rows, np.arange(n_sym), side="right") - 1
    valid = latest >= 0
    h = np.zeros((n_sym, obs.n_fft), dtype=complex)
    h[valid] = est[latest[valid]]
    return h, valid


def _beta(obs: Observation, opts) -> float:
    if opts.get("beta", "auto") == "auto":
        return obs.cfg.ofdm.constellation.beta
    return float(opts["beta"])


@lru_cache(maxsize=256)
def _genie_corr(pdp, n_fft, snr, beta, positions):
    return FreqCorrelation.from_pdp(pdp, n_fft, snr, beta,
                                    None if positions is None else list(positions))


@lru_cache(maxsize=256)
def _smoother(pdp, n_fft, snr, beta, positions, rank):
    corr = _genie_corr(pdp, n_fft, snr, beta, positions)
    if rank is None:
        return lmmse_matrix(corr)
    return lowrank_matrix(corr, rank)


def _pos_key(positions):
    return None if positions is None else tuple(int(p) for p in positions)


def _empirical_corr(obs: Observation, positions, beta, n_train) -> FreqCorrelation:
    cfg = obs.cfg
    rng = obs.prelude_rng
    seed = int(rng.integers(2 ** 63))
    fading = FadingSpec(cfg.fading.doppler_rate, cfg.fading.n_oscillators, seed)
    real = generate_fading(cfg.pdp, fading, n_train, obs.n_fft)
    h = real.freq_response
    if positions is not None:
        h = h[:, positions]
    noisy = h + complex_noise(rng, h.shape, obs.noise_var)
    return FreqCorrelation.from_samples(noisy, obs.snr, beta, obs.noise_var)


def run_perfect(obs, opts):
    return obs.truth.copy(), np.ones(obs.frame.n_symbols, dtype=bool)


def run_ls(obs, opts):
    rows, pos, h_ls = _observed(obs)
    return _expand(obs, rows, pos, h_ls)


def run_lms(obs, opts):
    rows, pos, _ = _observed(obs)
    cols = slice(None) if pos is None else pos
    ys = obs.Y[rows][:, cols]
    xs = obs.frame.grid[rows][:, cols]
    mu = opts["step"]
    est = track_lms(ys, xs, mu)
    # estimate used on symbol n includes that symbol's own pilot observation
    post = est + mu * np.conj(xs) * (ys - est * xs)
    return _expand(obs, rows, pos, post)


def run_mmse(obs, opts):
    rows, pos, _ = _observed(obs)
    cols = slice(None) if pos is None else pos
    est = np.stack([
        estimate_mmse(obs.Y[r, cols], obs.frame.grid[r, cols], obs.cfg.pdp,
                      obs.noise_var, n_fft=obs.n_fft, positions=pos)
        for r in rows])
    return _expand(obs, rows, pos, est)


def run_lmmse(obs, opts):
    rows, pos, h_ls = _observed(obs)
    beta = _beta(obs, opts)
    if opts.get("correlation", "genie") == "empirical":
        w = lmmse_matrix(_empirical_corr(obs, pos, beta, opts["training_symbols"]))
    else:
        w = _smoother(obs.cfg.pdp, obs.n_fft, obs.snr, beta, _pos_key(pos), None)
    return _expand(obs, rows, pos, h_ls @ w.T)


def run_lowrank(obs, opts):
    rows, pos, h_ls = _observed(obs)
    rank = opts["rank"] or obs.cfg.pdp.n_taps
    rank = min(rank, h_ls.shape[1])
    w = _smoother(obs.cfg.pdp, obs.n_fft, obs.snr, _beta(obs, opts), _pos_key(pos), rank)
    return _expand(obs, rows, pos, h_ls @ w.T)


def run_ml(obs, opts):
    rows, pos, h_ls = _observed(obs)
    n_taps = opts["n_taps"] or obs.cfg.ofdm.cp_length
    p = ml_projection(obs.n_fft, n_taps, pos)
    return _expand(obs, rows, pos, h_ls @ p.T)


def _time_correlation(cfg: SweepConfig):
    if cfg.channel_model == "fixed":
        return lambda m: 1.0
    return jakes_correlation(cfg.fading.doppler_rate)


def _kalman_training(obs, vector, state):
    """Update on pilot cells only; data symbols are bridged by prediction."""
    n = obs.n_fft
    grid, Y = obs.frame.grid, obs.Y
    kind = obs.cfg.ofdm.pilots.kind
    pilot_rows = set(_pilot_rows(obs).tolist())
    pos = obs.cfg.ofdm.pilots.positions(n)
    n_sym = obs.frame.n_symbols
    if kind == "comb" and not vector:
        # one scalar tracker per pilot subcarrier, interpolated in frequency
        h = np.empty((n_sym, pos.size), dtype=complex)
        for r in range(n_sym):
            state, h[r] = kalman_step_scalar(state, Y[r, pos], grid[r, pos], obs.noise_var)
        return interpolate_comb(h, pos, n, obs.cfg.interpolation)
    h = np.empty((n_sym, n), dtype=complex)
    for r in range(n_sym):
        if kind == "comb":
            state, h[r] = kalman_step_vector(state, Y[r, pos], grid[r, pos],
                                             obs.noise_var, positions=pos)
        elif r in pilot_rows:
            step = kalman_step_vector if vector else kalman_step_scalar
            state, h[r] = step(state, Y[r], grid[r], obs.noise_var)
        else:
            state = kalman_predict(state)
            h[r] = state.x[:n] if vector else state.x[:, 0]
    return h


def _kalman_decision(obs, vector, state):
    """Update on every cell, data cells using hard decisions on the prediction."""
    n = obs.n_fft
    grid, Y, mask = obs.frame.grid, obs.Y, obs.frame.pilot_mask
    const = obs.cfg.ofdm.constellation
    comb = obs.cfg.ofdm.pilots.kind == "comb"
    if comb:
        _, pos, h_ls = _observed(obs)
        h_pilot = interpolate_comb(h_ls, pos, n, obs.cfg.interpolation)
    h = np.empty((obs.frame.n_symbols, n), dtype=complex)
    for r in range(obs.frame.n_symbols):
        # scalar trackers on data subcarriers have no pilot anchor of their
        # own, so their decisions lean on the interpolated pilots instead
        if comb and (r == 0 or not vector):
            pred = h_pilot[r]
        else:
            pred = (state.transition @ state.x)[:n] if vector else state.x @ state.transition[0]
        safe = np.where(np.abs(pred) < 1e-12, 1.0, pred)
        s = np.where(mask[r], grid[r], hard_decision(Y[r] / safe, const))
        step = kalman_step_vector if vector else kalman_step_scalar
        state, h[r] = step(state, Y[r], s, obs.noise_var)
    return h


def run_kalman(obs, opts):
    cfg = obs.cfg
    n = obs.n_fft
    corr = _time_correlation(cfg)
    vector = opts["variant"] == "vector"
    order = opts["order"] or (1 if vector else 2)
    if vector:
        R = _genie_corr(cfg.pdp, n, np.inf, 1.0, None).R_HH
        state = init_vector_kalman(corr, R, order)
    else:
        width = n // cfg.ofdm.pilots.spacing if (
            cfg.ofdm.pilots.kind == "comb" and opts["mode"] == "training") else n
        state = init_scalar_kalman(corr, order, n_subcarriers=width)
    if opts["mode"] == "decision":
        h = _kalman_decision(obs, vector, state)
    else:
        h = _kalman_training(obs, vector, state)
    return h, np.ones(obs.frame.n_symbols, dtype=bool)


REGISTRY = {
    "perfect": run_perfect,
    "ls": run_ls,
    "lms": run_lms,
    "mmse": run_mmse,
    "lmmse": run_lmmse,
    "lowrank": run_lowrank,
    "ml": run_ml,
    "kalman": run_kalman,
}

assert set(REGISTRY) == set(METHOD_PARAMS)


def run_method(name: str, obs: Observation, opts: dict) -> ChannelEstimate:
    h, valid = REGISTRY[name](obs, opts)
    return ChannelEstimate(h, name, valid)
