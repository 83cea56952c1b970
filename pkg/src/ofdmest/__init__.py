"""OFDM channel estimation benchmark.

Baseband OFDM modem, Rayleigh fading channel with Jakes statistics, a
catalogue of pilot-aided, tracking and blind channel estimators, and a
deterministic Monte Carlo harness reporting BER, MSE and RMSE against SNR.
"""

from .config import MethodSpec, SweepConfig, parse_config
from .errors import (ConfigError, EstimationError, IdentifiabilityError,
                     InsufficientDataError, OfdmEstError, SolveError)
from .harness import (MetricRecord, SweepResult, compute_ber, compute_mse,
                      compute_rmse, read_results, run_sweep, write_results)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "EstimationError", "IdentifiabilityError",
    "InsufficientDataError", "MethodSpec", "MetricRecord", "OfdmEstError",
    "SolveError", "SweepConfig", "SweepResult", "compute_ber", "compute_mse",
    "compute_rmse", "parse_config", "read_results", "run_sweep",
    "write_results",
]
