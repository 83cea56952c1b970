"""
Blind channel identification from second-order statistics.

The received stream is cut into windows of ``N_blocks`` consecutive OFDM
blocks (block length ``K = M + P``).  Inside a window, samples are stacked
newest block first and, within each block, newest sample first, so the
stacked vector is ``r = H s + b`` with ``H`` the banded Toeplitz matrix whose
rows read ``[.. h_0 h_1 .. h_L ..]``.  The oldest block is truncated to its
first ``K - L`` stacked entries, which depend on that block's samples only.

The noise subspace ``G`` of the window correlation is orthogonal to
``H W~``; writing ``G_k^T H = h^T xi_k`` turns the orthogonality into the
quadratic form ``h^H Psi h`` whose minimizer (unit norm) is the estimate.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import IdentifiabilityError, InsufficientDataError
from ..numkernel import eig_hermitian

#: relative eigen-gap under which the minimizer of ``Psi`` is flagged
TIE_TOL = 1e-9


@dataclass(frozen=True)
class SubspaceWorkspace:
    M: int
    P: int
    L: int
    N_blocks: int
    R_r: np.ndarray
    G_noise: np.ndarray
    Psi: np.ndarray

    @property
    def K(self) -> int:
        return self.M + self.P


@dataclass(frozen=True)
class SubspaceResult:
    """Unit-norm tap estimate ``h`` (length ``L + 1``), known up to a complex scale."""

    h: np.ndarray
    psi_eigenvalues: np.ndarray
    low_confidence: bool
    workspace: SubspaceWorkspace


def block_transform(M: int, P: int) -> np.ndarray:
    """``K x M`` modulation matrix in newest-sample-first order.

    Row ``i`` holds sample ``t = K - 1 - i`` of a prefixed block:
    ``exp(2j pi m (t - P) / M)``.
    """
    K = M + P
    t = (K - 1 - np.arange(K))[:, None]
    m = np.arange(M)[None, :]
    return np.exp(2j * np.pi * m * (t - P) / M)


def stack_windows(received, M: int, P: int, L: int, N_blocks: int,
                  n_superblocks: int) -> np.ndarray:
    """Stacked window vectors, one per row, shape ``(n_superblocks, N_blocks K - L)``."""
    K = M + P
    received = np.asarray(received, dtype=complex)
    need = n_superblocks * N_blocks * K
    if received.size < need:
        raise InsufficientDataError(
            f"need {need} samples for {n_superblocks} windows, got {received.size}")
    blocks = received[:need].reshape(n_superblocks, N_blocks, K)
    # newest block first, newest sample first
    stacked = blocks[:, ::-1, ::-1].reshape(n_superblocks, N_blocks * K)
    return stacked[:, :N_blocks * K - L]


def shift_matrix(g, L: int, width: int) -> np.ndarray:
    """``(L+1) x width`` matrix with row ``l`` equal to `g` shifted right by ``l``."""
    g = np.asarray(g)
    xi = np.zeros((L + 1, width), dtype=complex)
    for l in range(L + 1):
        xi[l, l:l + g.size] = g
    return xi


def subspace_identify(received, M: int, P: int, L: int, N_blocks: int,
                      n_superblocks: int = 400) -> SubspaceResult:
    """Estimate the ``L + 1`` channel taps from a block-aligned received stream.

    Parameters
    ----------
    received : array_like
        Received samples; sample 0 is the first sample of a prefixed block.
    M, P : int
        Carriers per block and cyclic prefix length.
    L : int
        Channel order (number of taps minus one).
    N_blocks : int
        Blocks stacked per window.
    n_superblocks : int
        Number of non-overlapping windows averaged into the correlation.

    Raises
    ------
    IdentifiabilityError
        If ``L > P * N_blocks``.
    InsufficientDataError
        If the stream is shorter than ``n_superblocks * N_blocks * (M + P)``.
    """
    if L < 0 or L > P * N_blocks:
        raise IdentifiabilityError(
            f"channel order L={L} exceeds P*N_blocks={P * N_blocks}")
    if n_superblocks < 1:
        raise InsufficientDataError("n_superblocks must be >= 1")
    K = M + P
    width = N_blocks * K
    r = stack_windows(received, M, P, L, N_blocks, n_superblocks)
    R_r = r.T @ r.conj() / n_superblocks
    R_r = (R_r + R_r.conj().T) / 2
    _, vecs = eig_hermitian(R_r)
    G = vecs[:, :P * N_blocks - L]

    W_blk = np.kron(np.eye(N_blocks), block_transform(M, P))
    B = W_blk @ W_blk.conj().T
    Psi = np.zeros((L + 1, L + 1), dtype=complex)
    for g in G.T:
        xi = shift_matrix(g, L, width)
        Psi += xi @ B @ xi.conj().T
    Psi = (Psi + Psi.conj().T) / 2
    w, v = eig_hermitian(Psi)
    h = v[:, 0]
    # fix the arbitrary eigenvector phase: largest entry real positive
    pivot = h[np.argmax(np.abs(h))]
    h = h * (abs(pivot) / pivot)
    h = h / np.linalg.norm(h)
    tie = L > 0 and (w[1] - w[0]) < TIE_TOL * max(abs(w[-1]), 1e-300)
    ws = SubspaceWorkspace(M, P, L, N_blocks, R_r, G, Psi)
    return SubspaceResult(h, w, bool(tie), ws)
