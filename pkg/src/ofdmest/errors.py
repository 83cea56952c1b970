"""Exception hierarchy shared across the package."""

import numpy as np


class OfdmEstError(Exception):
    """Base class for every error raised by :mod:`ofdmest`."""


class SolveError(OfdmEstError, np.linalg.LinAlgError):
    """A linear system is singular or too ill-conditioned to solve reliably."""


class IdentifiabilityError(OfdmEstError, ValueError):
    """Blind identification requested outside its identifiability region."""


class InsufficientDataError(OfdmEstError, ValueError):
    """Not enough samples to form the requested statistics."""


class ConfigError(OfdmEstError, ValueError):
    """Invalid configuration.

    Parameters
    ----------
    key : str
        Dotted name of the offending key (``section.key``), or several keys
        joined with `` / `` when a constraint ties them together.
    rule : str
        Human readable constraint that was violated.
    """

    def __init__(self, key: str, rule: str):
        self.key = key
        self.rule = rule
        super().__init__(f"{key}: {rule}")


class EstimationError(OfdmEstError):
    """An estimator failed inside a Monte Carlo trial.

    Carries the sweep coordinates so a failing point can be reproduced.
    """

    def __init__(self, snr_db: float, method: str, trial: int, cause: Exception):
        self.snr_db = snr_db
        self.method = method
        self.trial = trial
        self.cause = cause
        super().__init__(
            f"{method} failed at snr={snr_db:g} dB, trial={trial}: {cause}")
