"""
Monte Carlo sweep engine.

For every (SNR, trial) pair a fading realization, a frame and the noise are
drawn from independent seeded streams, every configured estimator runs on
the same received grid, and data cells are equalized with ``Y / H_hat``.
Trials may execute in any order or process; they are aggregated in trial
order so the result does not depend on the worker count.
"""

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .channel import (ChannelRealization, FadingSpec,
                      empirical_autocorrelation, generate_fading,
                      jakes_correlation, propagate, snr_to_noise_var)
from .config import SweepConfig, config_from_dict, config_to_dict
from .errors import EstimationError, OfdmEstError, SolveError
from .estimators import ChannelEstimate
from .methods import Observation, run_method
from .modem import (assemble_frame, demap_symbols, ofdm_demodulate,
                    ofdm_modulate, payload_capacity)

log = logging.getLogger("ofdmest")

#: |H_hat| below this is treated as a deep fade and the cell is erased
ERASURE_LEVEL = 1e-12

CSV_COLUMNS = ("snr_db", "method", "ber", "mse", "rmse", "trials", "bit_count")

STREAM_FADING, STREAM_NOISE, STREAM_BITS, STREAM_PRELUDE = range(4)


@dataclass(frozen=True)
class MetricRecord:
    snr_db: float
    method: str
    ber: float
    mse: float
    rmse: float
    trials: int
    bit_count: int


@dataclass(frozen=True)
class SweepResult:
    """Aggregated records plus the configuration that produced them.

    `trial_table` maps ``(snr_db, method)`` to per-trial arrays
    (``errors``, ``bits``, ``mse``) for paired statistics.  It and `elapsed`
    are excluded from equality and from the structured file.
    """

    records: tuple
    config_echo: SweepConfig
    trial_table: dict = field(default_factory=dict, compare=False, repr=False)
    elapsed: float = field(default=0.0, compare=False)

    def record(self, snr_db: float, method: str) -> MetricRecord:
        for r in self.records:
            if r.snr_db == snr_db and r.method == method:
                return r
        raise KeyError((snr_db, method))


# ---------------------------------------------------------------------------
# metrics

def compute_ber(tx_bits, rx_bits) -> float:
    """Fraction of mismatched bits."""
    tx = np.asarray(tx_bits).ravel()
    rx = np.asarray(rx_bits).ravel()
    if tx.size != rx.size:
        raise ValueError(f"bit length mismatch: {tx.size} vs {rx.size}")
    if tx.size == 0:
        raise ValueError("empty bit sequences")
    return float(np.count_nonzero(tx != rx)) / tx.size


def compute_mse(h_hat, h_true) -> float:
    """Normalized MSE ``sum |h_hat - H|^2 / sum |H|^2`` over valid cells.

    `h_hat` is a :class:`ChannelEstimate` (rows flagged invalid are skipped)
    or a plain array of the same shape as `h_true`.
    """
    if isinstance(h_hat, ChannelEstimate):
        valid = h_hat.per_symbol_valid
        est = h_hat.h_hat
    else:
        est = np.asarray(h_hat)
        valid = None
    truth = np.asarray(h_true)
    if est.shape != truth.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {truth.shape}")
    if valid is not None:
        est, truth = est[valid], truth[valid]
    den = float(np.sum(np.abs(truth) ** 2))
    if den == 0:
        raise ValueError("true channel is identically zero")
    return float(np.sum(np.abs(est - truth) ** 2)) / den


def compute_rmse(mse: float) -> float:
    if mse < 0:
        raise ValueError(f"mse must be >= 0, got {mse}")
    return math.sqrt(mse)


# ---------------------------------------------------------------------------
# one trial

def trial_rng(master_seed: int, snr_index: int, trial_index: int,
              stream: int) -> np.random.Generator:
    """Counter-based generator for one (snr, trial, stream) cell."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(snr_index, trial_index, stream))
    return np.random.Generator(np.random.Philox(ss))


def noise_variance(cfg: SweepConfig, snr_db: float) -> float:
    return 0.0 if cfg.noiseless else snr_to_noise_var(snr_db)


def draw_channel(cfg: SweepConfig, rng: np.random.Generator,
                 n_symbols: int) -> ChannelRealization:
    """Fading realization (or the fixed channel) for one trial."""
    n = cfg.ofdm.n_subcarriers
    if cfg.channel_model == "fixed":
        taps = np.asarray(cfg.fixed_taps, dtype=complex)
        taps = taps[np.asarray(cfg.pdp.delays)]
        return ChannelRealization.from_taps(np.tile(taps, (n_symbols, 1)), cfg.pdp, n)
    spec = FadingSpec(cfg.fading.doppler_rate, cfg.fading.n_oscillators,
                      int(rng.integers(2 ** 63)))
    return generate_fading(cfg.pdp, spec, n_symbols, n)


def simulate_observation(cfg: SweepConfig, snr_index: int,
                         trial_index: int) -> Observation:
    """Transmit one frame through one channel draw at ``snr_grid_db[snr_index]``."""
    seed = cfg.master_seed
    n_sym = cfg.n_symbols_per_trial
    real = draw_channel(cfg, trial_rng(seed, snr_index, trial_index, STREAM_FADING), n_sym)
    bits_rng = trial_rng(seed, snr_index, trial_index, STREAM_BITS)
    bits = bits_rng.integers(0, 2, payload_capacity(cfg.ofdm, n_sym), dtype=np.uint8)
    frame = assemble_frame(bits, cfg.ofdm, n_sym)
    noise_var = noise_variance(cfg, cfg.snr_grid_db[snr_index])
    rx = propagate(ofdm_modulate(frame.grid, cfg.ofdm), real, noise_var,
                   trial_rng(seed, snr_index, trial_index, STREAM_NOISE))
    return Observation(
        cfg=cfg, frame=frame, Y=ofdm_demodulate(rx, cfg.ofdm),
        noise_var=noise_var, truth=real.freq_response,
        prelude_rng=trial_rng(seed, snr_index, trial_index, STREAM_PRELUDE))


def equalize_and_demap(obs: Observation, est: ChannelEstimate) -> np.ndarray:
    """Zero-forcing per data cell; erased cells demap to all-zero bits."""
    c = obs.cfg.ofdm.constellation
    data = ~obs.frame.pilot_mask
    h = est.h_hat[data]
    y = obs.Y[data]
    usable = (np.abs(h) >= ERASURE_LEVEL) & np.broadcast_to(
        est.per_symbol_valid[:, None], data.shape)[data]
    z = np.where(usable, y / np.where(usable, h, 1.0), 0.0)
    bits = demap_symbols(z, c).reshape(-1, c.bits_per_symbol)
    bits[~usable] = 0
    return bits.ravel()


def run_trial(cfg: SweepConfig, snr_index: int, trial_index: int) -> list:
    """Per-method ``(bit_errors, bit_count, nmse)`` for one trial, in config order.

    Raises
    ------
    EstimationError
        Wrapping any estimator failure with the sweep coordinates.
    """
    obs = simulate_observation(cfg, snr_index, trial_index)
    out = []
    for spec in cfg.methods:
        try:
            est = run_method(spec.name, obs, spec.options)
        except (OfdmEstError, SolveError, ValueError, np.linalg.LinAlgError) as exc:
            raise EstimationError(cfg.snr_grid_db[snr_index], spec.name,
                                  trial_index, exc) from exc
        rx_bits = equalize_and_demap(obs, est)
        errors = int(np.count_nonzero(rx_bits != obs.frame.payload_bits))
        out.append((errors, int(rx_bits.size), compute_mse(est, obs.truth)))
    return out


def _run_cell(args):
    cfg, snr_index, trial_index = args
    return run_trial(cfg, snr_index, trial_index)


# ---------------------------------------------------------------------------
# sweep

def run_sweep(cfg: SweepConfig, workers: int = 1) -> SweepResult:
    """Run every (SNR, trial) cell and aggregate per (SNR, method).

    BER is total bit errors over total bits; MSE is the mean of the
    per-trial normalized MSE.
    """
    start = time.perf_counter()
    cells = [(cfg, s, t) for s in range(len(cfg.snr_grid_db))
             for t in range(cfg.n_trials)]
    if workers > 1 and len(cells) > 1:
        chunk = max(1, len(cells) // (4 * workers))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, cells, chunksize=chunk))
    else:
        results = [_run_cell(c) for c in cells]

    n_t = cfg.n_trials
    records = []
    table = {}
    for s, snr_db in enumerate(cfg.snr_grid_db):
        block = np.array(results[s * n_t:(s + 1) * n_t], dtype=float)  # (trials, methods, 3)
        for m, name in enumerate(cfg.method_names):
            errors = block[:, m, 0].astype(np.int64)
            bits = block[:, m, 1].astype(np.int64)
            mse = block[:, m, 2]
            total_bits = int(bits.sum())
            ber = int(errors.sum()) / total_bits if total_bits else 0.0
            mean_mse = float(np.mean(mse))
            records.append(MetricRecord(float(snr_db), name, ber, mean_mse,
                                        compute_rmse(mean_mse), n_t, total_bits))
            table[(float(snr_db), name)] = {"errors": errors, "bits": bits, "mse": mse}
    elapsed = time.perf_counter() - start
    log.info("sweep finished: %d SNR points x %d trials x %d methods in %.2f s",
             len(cfg.snr_grid_db), n_t, len(cfg.methods), elapsed)
    return SweepResult(tuple(records), cfg, table, elapsed)


# ---------------------------------------------------------------------------
# single shots used by the CLI

def estimate_once(cfg: SweepConfig, snr_index: int = 0, trial_index: int = 0):
    """Truth and estimate grids of the first configured method for one trial."""
    obs = simulate_observation(cfg, snr_index, trial_index)
    spec = cfg.methods[0]
    try:
        est = run_method(spec.name, obs, spec.options)
    except (OfdmEstError, SolveError, ValueError, np.linalg.LinAlgError) as exc:
        raise EstimationError(cfg.snr_grid_db[snr_index], spec.name, trial_index, exc) from exc
    return obs.truth, est


def probe_channel(cfg: SweepConfig):
    """Lags, empirical tap autocorrelation and the ``J0`` reference."""
    rng = trial_rng(cfg.master_seed, 0, 0, STREAM_FADING)
    real = draw_channel(cfg, rng, cfg.probe_symbols)
    lags = np.arange(cfg.probe_lags + 1)
    emp = empirical_autocorrelation(real.tap_gains, cfg.probe_lags).real
    ref = np.array([jakes_correlation(cfg.fading.doppler_rate)(m) for m in lags])
    return lags, emp, ref


# ---------------------------------------------------------------------------
# serialization

def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def results_csv(result: SweepResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in result.records:
        w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def result_to_dict(result: SweepResult) -> dict:
    return {"records": [asdict(r) for r in result.records],
            "config": config_to_dict(result.config_echo)}


def result_from_dict(d: dict) -> SweepResult:
    records = tuple(MetricRecord(**r) for r in d["records"])
    return SweepResult(records, config_from_dict(d["config"]))


def write_results(result: SweepResult, path, fmt: str = "csv"):
    """Write `result` as CSV (records only) or JSON (records plus config echo).

    Raises
    ------
    OSError
        If the file cannot be written.
    """
    path = Path(path)
    if fmt == "csv":
        text = results_csv(result)
    elif fmt == "json":
        text = json.dumps(result_to_dict(result), indent=2, sort_keys=True) + "\n"
    else:
        raise ValueError(f"unknown format {fmt!r}")
    path.write_text(text, encoding="utf-8")


def read_results(path, fmt: str = "json"):
    """Inverse of :func:`write_results`.

    JSON gives a full :class:`SweepResult`; CSV gives a tuple of records.
    """
    text = Path(path).read_text(encoding="utf-8")
    if fmt == "json":
        return result_from_dict(json.loads(text))
    if fmt == "csv":
        rows = list(csv.DictReader(io.StringIO(text)))
        return tuple(MetricRecord(float(r["snr_db"]), r["method"], float(r["ber"]),
                                  float(r["mse"]), float(r["rmse"]), int(r["trials"]),
                                  int(r["bit_count"])) for r in rows)
    raise ValueError(f"unknown format {fmt!r}")
