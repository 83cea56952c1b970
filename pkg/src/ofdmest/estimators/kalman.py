"""
Kalman trackers for AR-modelled subcarrier gains.

Two variants share one AR fit of the Jakes time correlation:

* vector mode tracks all N subcarriers jointly with state
  ``[h(n), ..., h(n-p+1)]`` (dimension pN), block companion transition
  ``-a_i I_N`` and driving covariance ``sigma^2 R_HH`` in the leading block;
* scalar mode runs an independent p-dimensional filter per subcarrier with
  the same AR coefficients on every subcarrier.  Scalar states carry a
  leading batch axis so all subcarriers update in one call.

Each step is predict + update::

    M     = C Sigma C^H + G G^H
    Gamma = D M D^H + sigma_w^2 I
    K     = M D^H Gamma^-1
    x     = C x + K (y - D C x)
    Sigma = (I - K D) M
"""

from dataclasses import dataclass, replace

import numpy as np

from ..channel import ArModel, fit_ar_yule_walker
from ..errors import SolveError
from ..numkernel import hermitian_solve

#: diagonal loading applied when the plain Yule-Walker system is singular
YW_LOADING = 1e-6


@dataclass(frozen=True)
class KalmanState:
    """Filter state.

    For ``mode == "scalar"``, `x` has shape ``(K, p)`` and `Sigma`
    ``(K, p, p)`` for K independent subcarriers.  For ``mode == "vector"``,
    `x` has shape ``(p N,)`` and `Sigma` ``(p N, p N)``.
    """

    x: np.ndarray
    Sigma: np.ndarray
    model: ArModel
    mode: str
    transition: np.ndarray
    drive_cov: np.ndarray

    @property
    def order(self) -> int:
        return self.model.order

    @property
    def n_subcarriers(self) -> int:
        if self.mode == "scalar":
            return self.x.shape[0]
        return self.x.shape[0] // self.order


def fit_ar_model(correlation, order: int) -> ArModel:
    """Yule-Walker fit, retried with :data:`YW_LOADING` if the system is singular."""
    try:
        model = fit_ar_yule_walker(correlation, order)
    except SolveError:
        return fit_ar_yule_walker(correlation, order, loading=YW_LOADING)
    if not model.is_stable:
        return fit_ar_yule_walker(correlation, order, loading=YW_LOADING)
    return model


def _toeplitz(correlation, order: int) -> np.ndarray:
    r = np.array([correlation(m) for m in range(order)], dtype=float)
    idx = np.arange(order)
    return r[np.abs(idx[:, None] - idx[None, :])]


def init_scalar_kalman(correlation, order: int = 2, n_subcarriers: int = 1,
                       variance: float = 1.0) -> KalmanState:
    """Zero state with the stationary covariance of ``variance * correlation``.

    `correlation` is the normalized time correlation ``m -> r(m)`` of every
    subcarrier gain.
    """
    model = fit_ar_model(correlation, order)
    c = model.companion()
    q = np.zeros((order, order), dtype=complex)
    q[0, 0] = variance * model.innovation_var
    sigma0 = variance * _toeplitz(correlation, order).astype(complex)
    return KalmanState(
        x=np.zeros((n_subcarriers, order), dtype=complex),
        Sigma=np.broadcast_to(sigma0, (n_subcarriers, order, order)).copy(),
        model=model, mode="scalar", transition=c, drive_cov=q)


def init_vector_kalman(correlation, R_HH, order: int = 1) -> KalmanState:
    """Joint tracker for all subcarriers.

    The space-time correlation is taken as separable,
    ``E[h(n) h(n-m)^H] = r(m) R_HH``, so the vector AR coefficients are
    ``a_i I_N`` and the driving covariance is ``sigma^2 R_HH``.
    """
    R_HH = np.asarray(R_HH, dtype=complex)
    n = R_HH.shape[0]
    model = fit_ar_model(correlation, order)
    eye = np.eye(n)
    c = np.kron(model.companion(), eye)
    lead = np.zeros((order, order))
    lead[0, 0] = 1.0
    q = np.kron(lead, model.innovation_var * R_HH)
    sigma0 = np.kron(_toeplitz(correlation, order), R_HH)
    return KalmanState(
        x=np.zeros(order * n, dtype=complex), Sigma=sigma0, model=model,
        mode="vector", transition=c, drive_cov=q)


def kalman_predict(state: KalmanState) -> KalmanState:
    """Time update only (no observation): ``x <- C x``, ``Sigma <- M``."""
    C = state.transition
    if state.mode == "scalar":
        x = state.x @ C.T
        sigma = C @ state.Sigma @ C.conj().T + state.drive_cov
        sigma = (sigma + np.conj(np.swapaxes(sigma, 1, 2))) / 2
    else:
        x = C @ state.x
        sigma = C @ state.Sigma @ C.conj().T + state.drive_cov
        sigma = (sigma + sigma.conj().T) / 2
    return replace(state, x=x, Sigma=sigma)


def kalman_step_vector(state: KalmanState, y, S, noise_var: float, positions=None):
    """One predict/update cycle of the joint tracker.

    Parameters
    ----------
    state : KalmanState
        Vector-mode state.
    y : array_like
        Received subcarrier values for this symbol (length N).
    S : array_like
        Transmitted symbols, either the diagonal (length N) or the N x N
        diagonal matrix.
    noise_var : float
        Per-subcarrier noise variance.
    positions : array_like, optional
        Subcarriers that `y` and `S` refer to when only some are observed
        (for instance comb pilots).  Defaults to all N.

    Returns
    -------
    (KalmanState, np.ndarray)
        Updated state and the channel estimate ``x[:N]``.
    """
    if state.mode != "vector":
        raise ValueError("kalman_step_vector needs a vector-mode state")
    y = np.asarray(y, dtype=complex)
    S = np.asarray(S, dtype=complex)
    s = np.diag(S) if S.ndim == 2 else S
    n = state.n_subcarriers
    obs = np.arange(n) if positions is None else np.asarray(positions, dtype=int)
    if y.size != obs.size or s.size != obs.size:
        raise ValueError("y and S must have one entry per observed subcarrier")
    C = state.transition
    if n == 1:
        # a single subcarrier is the scalar recursion; share its arithmetic
        xs, sig = _scalar_update(state.x[None], state.Sigma[None], C,
                                 state.drive_cov, s, y, noise_var)
        return replace(state, x=xs[0], Sigma=sig[0]), xs[0, :1]
    dim = state.x.size
    D = np.zeros((obs.size, dim), dtype=complex)
    D[np.arange(obs.size), obs] = s
    M = C @ state.Sigma @ C.conj().T + state.drive_cov
    DM = D @ M
    Gamma = DM @ D.conj().T + noise_var * np.eye(obs.size)
    K = hermitian_solve(Gamma, DM).conj().T
    x_pred = C @ state.x
    x = x_pred + K @ (y - D @ x_pred)
    Sigma = (np.eye(dim) - K @ D) @ M
    Sigma = (Sigma + Sigma.conj().T) / 2
    return replace(state, x=x, Sigma=Sigma), x[:n]


def _scalar_update(x, Sigma, C, Q, s, y, noise_var):
    """Batched predict/update; `x` is ``(K, p)``, `Sigma` ``(K, p, p)``."""
    k, p = x.shape
    d = np.zeros((k, 1, p), dtype=complex)
    d[:, 0, 0] = s
    d_h = np.conj(np.swapaxes(d, 1, 2))
    M = C @ Sigma @ C.conj().T + Q
    gamma = (d @ M @ d_h)[:, 0, 0].real + noise_var
    if not np.all(gamma > 0):
        raise SolveError("innovation variance is not positive")
    K = (M @ d_h)[:, :, 0] / gamma[:, None]
    x_pred = x @ C.T
    innov = y - (d[:, 0, :] * x_pred).sum(axis=1)
    x = x_pred + K * innov[:, None]
    Sigma = (np.eye(p) - K[:, :, None] * d) @ M
    Sigma = (Sigma + np.conj(np.swapaxes(Sigma, 1, 2))) / 2
    return x, Sigma


def kalman_step_scalar(state: KalmanState, y_k, s_k, noise_var: float):
    """One predict/update cycle of the per-subcarrier trackers.

    `y_k` and `s_k` are scalars or length-K arrays matching the state's
    batch axis.  Returns the updated state and ``x[..., 0]``.

    Raises
    ------
    SolveError
        If an innovation variance is not positive.
    """
    if state.mode != "scalar":
        raise ValueError("kalman_step_scalar needs a scalar-mode state")
    y = np.atleast_1d(np.asarray(y_k, dtype=complex))
    s = np.atleast_1d(np.asarray(s_k, dtype=complex))
    k = state.x.shape[0]
    y = np.broadcast_to(y, (k,))
    s = np.broadcast_to(s, (k,))
    x, Sigma = _scalar_update(state.x, state.Sigma, state.transition,
                              state.drive_cov, s, y, noise_var)
    new = replace(state, x=x, Sigma=Sigma)
    h = x[:, 0]
    return new, (h[0] if np.ndim(y_k) == 0 else h)
