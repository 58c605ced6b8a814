"""Matrix-weighted fusion of the local state estimates.

The fused estimate is x0 = sum_i G_i x_i with weights chosen to minimize
the fused error covariance subject to sum_i G_i = I. With Sigma the block
matrix of pairwise state-error covariances and H a stack of identities, the
optimal stacked weights are Sigma^-1 H (H^T Sigma^-1 H)^-1 and the fused
covariance is P0 = (H^T Sigma^-1 H)^-1.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import FusionError
from .linalg import symmetrize


@dataclass
class FusionWeights:
    """Per-sensor weight matrices, the covariance grid, and P0."""

    G: list               # r matrices, each n x n
    Sigma: np.ndarray     # nr x nr
    P0: np.ndarray        # n x n


@dataclass
class FusedEstimate:
    """The fused state estimate."""

    x0_hat: np.ndarray


def state_block(P_X_ij, n):
    """Top-left n x n block: the state part of an augmented cross-covariance."""
    P_X_ij = np.asarray(P_X_ij, dtype=float)
    return P_X_ij[:n, :n].copy()


def assemble_sigma(blocks, rtol=1e-8):
    """Assemble the r x r grid of n x n state-error blocks into Sigma.

    The grid should satisfy block[i][j] == block[j][i]^T; a violation beyond
    `rtol` (relative to the grid scale) is repaired by symmetrizing the
    assembled matrix and reported as a warning.
    """
    r = len(blocks)
    Sigma = np.block([[np.asarray(blocks[i][j], dtype=float)
                       for j in range(r)] for i in range(r)])
    scale = max(np.linalg.norm(Sigma), 1.0)
    worst = 0.0
    for i in range(r):
        for j in range(i, r):
            worst = max(worst, np.linalg.norm(
                blocks[i][j] - np.asarray(blocks[j][i]).T))
    if worst > rtol * scale:
        warnings.warn(
            f"fusion covariance grid is not transpose-coherent "
            f"(deviation {worst:.3e}); symmetrizing", stacklevel=2)
    return symmetrize(Sigma)


def compute_weights(Sigma, r):
    """Optimal matrix weights from the assembled covariance grid.

    If the positive-definite solve fails, one retry with a trace-scaled
    ridge is attempted before raising FusionError.
    """
    Sigma = symmetrize(np.asarray(Sigma, dtype=float))
    nr = Sigma.shape[0]
    if nr % r != 0:
        raise FusionError(f"Sigma dimension {nr} is not divisible by r={r}")
    n = nr // r
    if r == 1:
        # a single source: the normalization constraint forces the identity
        # weight, with no solve involved
        return FusionWeights(G=[np.eye(n)], Sigma=Sigma, P0=Sigma.copy())
    H = np.tile(np.eye(n), (r, 1))

    def _solve(M):
        c, low = scipy.linalg.cho_factor(M, check_finite=False)
        return scipy.linalg.cho_solve((c, low), H, check_finite=False)

    try:
        W = _solve(Sigma)
    except scipy.linalg.LinAlgError:
        lam = 1e-9 * np.trace(Sigma) / nr
        try:
            W = _solve(Sigma + lam * np.eye(nr))
        except scipy.linalg.LinAlgError:
            raise FusionError("fusion covariance matrix is singular",
                              cond=float(np.linalg.cond(Sigma))) from None

    M = symmetrize(H.T @ W)   # H^T Sigma^-1 H
    try:
        c, low = scipy.linalg.cho_factor(M, check_finite=False)
        P0 = scipy.linalg.cho_solve((c, low), np.eye(n), check_finite=False)
    except scipy.linalg.LinAlgError:
        raise FusionError("fused information matrix is singular",
                          cond=float(np.linalg.cond(M))) from None
    P0 = symmetrize(P0)
    stacked = W @ P0
    G = [stacked[i * n:(i + 1) * n, :].T.copy() for i in range(r)]
    return FusionWeights(G=G, Sigma=Sigma, P0=P0)


def fuse_states(weights, local_estimates):
    """Weighted combination of the local state estimates."""
    if len(local_estimates) != len(weights.G):
        raise ValueError(
            f"{len(weights.G)} weights but {len(local_estimates)} estimates")
    n = weights.G[0].shape[0]
    x0 = np.zeros(n)
    for G_i, x_i in zip(weights.G, local_estimates):
        x_i = np.asarray(x_i, dtype=float).reshape(-1)
        if x_i.shape != (n,):
            raise ValueError(
                f"local estimate must have length {n}, got {x_i.shape}")
        x0 += G_i @ x_i
    return FusedEstimate(x0_hat=x0)
