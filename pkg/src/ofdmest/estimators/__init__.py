"""Channel estimators: pilot-aided, Kalman trackers and blind subspace."""

from .kalman import (KalmanState, fit_ar_model, init_scalar_kalman,
                     init_vector_kalman, kalman_predict, kalman_step_scalar,
                     kalman_step_vector)
from .pilot import (ChannelEstimate, FreqCorrelation, estimate_lmmse,
                    estimate_lowrank, estimate_ls, estimate_ml, estimate_mmse,
                    interpolate_comb, lmmse_matrix, lowrank_matrix,
                    ml_projection, resolve_scale_ambiguity, tap_matrix,
                    track_lms)
from .subspace import (SubspaceResult, SubspaceWorkspace, block_transform,
                       shift_matrix, stack_windows, subspace_identify)

__all__ = [
    "ChannelEstimate", "FreqCorrelation", "KalmanState", "SubspaceResult",
    "SubspaceWorkspace", "block_transform", "estimate_lmmse",
    "estimate_lowrank", "estimate_ls", "estimate_ml", "estimate_mmse",
    "fit_ar_model", "init_scalar_kalman", "init_vector_kalman",
    "interpolate_comb", "kalman_predict", "kalman_step_scalar", "kalman_step_vector",
    "lmmse_matrix", "lowrank_matrix", "ml_projection",
    "resolve_scale_ambiguity", "shift_matrix", "stack_windows",
    "subspace_identify", "tap_matrix", "track_lms",
]
