"""Comparison baseline: a plain Kalman filter on the augmented system.

The unknown-input term is treated as extra process noise on the attack
channel with configurable intensity q_theta (there is no statistical
information about the attack increment, so this is a knob, not an
estimate). The covariance update uses Joseph form to keep P symmetric PSD.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .linalg import pd_solve, require_symmetric, symmetrize


@dataclass
class AkfState:
    """Augmented Kalman filter state for one weak sensor."""

    X_hat: np.ndarray
    P: np.ndarray
    q_theta: float
    k: int = 0


def init_akf(aug, X_hat0=None, P0=None, q_theta=1.0):
    d = aug.n_aug
    if q_theta < 0:
        raise ConfigurationError("q_theta must be >= 0")
    X_hat = (np.zeros(d) if X_hat0 is None
             else np.asarray(X_hat0, dtype=float).reshape(-1).copy())
    if X_hat.shape != (d,):
        raise ConfigurationError(
            f"X_hat0 must have length {d}, got {X_hat.shape}")
    P = np.eye(d) if P0 is None else require_symmetric(P0, "P0")
    if P.shape != (d, d):
        raise ConfigurationError(f"P0 must be {d}x{d}, got {P.shape}")
    return AkfState(X_hat=X_hat, P=P.copy(), q_theta=float(q_theta))


def akf_gain(P, aug, q_theta):
    """One covariance cycle: returns (K_f, P_updated).

    Predict with the attack channel inflated by q_theta, then correct in
    Joseph form. Shared by the filter step and the precomputed schedules.
    """
    A_a, Phi_a, C_a, R = aug.A_a, aug.Phi_a, aug.C_a, aug.R
    P_pred = A_a @ P @ A_a.T + aug.Q_a + q_theta * (Phi_a @ Phi_a.T)
    P_pred = symmetrize(P_pred)
    S = C_a @ P_pred @ C_a.T + R
    K_f = pd_solve(S, C_a @ P_pred, "baseline innovation covariance").T
    IKC = np.eye(P.shape[0]) - K_f @ C_a
    P_new = symmetrize(IKC @ P_pred @ IKC.T + K_f @ R @ K_f.T)
    return K_f, P_new


def akf_step(state, y, aug):
    """Advance the baseline filter one step with measurement y."""
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape != (aug.m,):
        raise ValueError(
            f"measurement must have length {aug.m}, got shape {y.shape}")
    K_f, P_new = akf_gain(state.P, aug, state.q_theta)
    pred = aug.A_a @ state.X_hat
    state.X_hat = pred + K_f @ (y - aug.C_a @ pred)
    state.P = P_new
    state.k += 1
    return state
