"""Pairwise second moments between two local estimators.

Fusion needs the cross-covariance of the state errors of every ordered pair
of local estimators. Five coupled matrices are propagated per ordered pair:
P_X (state error cross-covariance), P_phi (input error cross-covariance),
U (state error vs. input estimate), Y (input error vs. input estimate) and
V (input estimate cross moment). The (i, j) and (j, i) directions are
stepped together because each update consumes the transposed blocks of the
other direction.

The recursions assume the two enhanced measurement noises are uncorrelated.
When both weak sensors share a strong sensor that assumption is violated;
the scenario builder reports this as a diagnostic note and the recursions
are applied unchanged.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


@dataclass
class CrossState:
    """Cross moments for the ordered pair (i, j) at the current step."""

    i: int
    j: int
    P_X: np.ndarray     # (n+p_i, n+p_j)
    P_phi: np.ndarray   # (p_i, p_j)
    U: np.ndarray       # (n+p_i, p_j)
    Y: np.ndarray       # (p_i, p_j)
    V: np.ndarray       # (p_i, p_j)
    Q_a: np.ndarray     # cross process-noise block (n+p_i, n+p_j)
    k: int = 0


def init_cross(pair, n, p_i, p_j, Q, init=None):
    """Initial cross state for an ordered pair, all moments zero by default.

    `init` may supply any of P_X0, P_phi0, U0, Y0, V0 as a dict.
    """
    i, j = pair
    if i == j:
        raise ConfigurationError("cross state is defined for distinct pairs")
    init = init or {}

    def _mat(name, shape):
        value = init.get(name)
        if value is None:
            return np.zeros(shape)
        M = np.atleast_2d(np.asarray(value, dtype=float))
        if M.shape != shape:
            raise ConfigurationError(
                f"cross init {name}[{i},{j}] must have shape {shape}, "
                f"got {M.shape}")
        return M.copy()

    Q_a = np.zeros((n + p_i, n + p_j))
    Q_a[:n, :n] = Q
    return CrossState(
        i=i, j=j,
        P_X=_mat("P_X0", (n + p_i, n + p_j)),
        P_phi=_mat("P_phi0", (p_i, p_j)),
        U=_mat("U0", (n + p_i, p_j)),
        Y=_mat("Y0", (p_i, p_j)),
        V=_mat("V0", (p_i, p_j)),
        Q_a=Q_a,
    )


def _one_direction(cs_ij, cs_ji, gains_i, gains_j, aug_i, aug_j):
    """New (i, j) moments from the step k-1 pair states and step-k gains."""
    A_i, Phi_i, C_i = aug_i.A_a, aug_i.Phi_a, aug_i.C_a
    A_j, Phi_j, C_j = aug_j.A_a, aug_j.Phi_a, aug_j.C_a
    K_i, Gamma_i = gains_i.K, gains_i.Gamma
    K_j, Gamma_j = gains_j.K, gains_j.Gamma
    p_i, p_j = Phi_i.shape[1], Phi_j.shape[1]

    GC_i = Gamma_i @ C_i
    GC_j = Gamma_j @ C_j
    T_i = GC_i @ Phi_i
    T_j = GC_j @ Phi_j
    Gamma_a_i = np.eye(p_i) - T_i
    Gamma_a_j = np.eye(p_j) - T_j
    Gamma_b_i = GC_i @ A_i
    Gamma_b_j = GC_j @ A_j
    K_a_i = np.eye(A_i.shape[0]) - K_i @ C_i
    K_a_j = np.eye(A_j.shape[0]) - K_j @ C_j

    Xi1 = cs_ij.P_phi + cs_ij.Y + cs_ji.Y.T
    Xi = (A_i @ cs_ij.P_X @ A_j.T
          - A_i @ cs_ij.U @ Phi_j.T
          - Phi_i @ cs_ji.U.T @ A_j.T
          - Phi_i @ Xi1 @ Phi_j.T
          + cs_ij.Q_a)

    GXi = GC_i @ Xi
    GXiG = GXi @ GC_j.T
    UjiGb = cs_ji.U.T @ Gamma_b_j.T
    GbUij = Gamma_b_i @ cs_ij.U

    P_phi = T_i @ Xi1 - Xi1 @ Gamma_a_j.T + UjiGb + GbUij + GXiG
    P_X = K_a_i @ Xi @ K_a_j.T
    U = K_a_i @ (A_i @ cs_ij.U - Phi_i @ cs_ij.V) + K_a_i @ Xi @ GC_j.T
    Y = (-UjiGb - GbUij - Xi1 @ T_j.T - Gamma_a_i @ cs_ij.V - GXiG)
    V = GXiG + cs_ij.V @ Gamma_a_j.T - T_i @ cs_ij.V + UjiGb + GbUij
    return P_X, P_phi, U, Y, V


def propagate_cross(cs_ij, cs_ji, gains_i, gains_j, aug_i, aug_j):
    """Advance both directions of one pair to step k, in place.

    Both directions are computed from the step k-1 values before either is
    overwritten; the gains must be the step-k outputs of the two local
    estimators.
    """
    if (cs_ij.i, cs_ij.j) != (cs_ji.j, cs_ji.i):
        raise ConfigurationError(
            f"cross states ({cs_ij.i},{cs_ij.j}) and ({cs_ji.i},{cs_ji.j}) "
            "are not the two directions of one pair")
    fwd = _one_direction(cs_ij, cs_ji, gains_i, gains_j, aug_i, aug_j)
    bwd = _one_direction(cs_ji, cs_ij, gains_j, gains_i, aug_j, aug_i)
    cs_ij.P_X, cs_ij.P_phi, cs_ij.U, cs_ij.Y, cs_ij.V = fwd
    cs_ji.P_X, cs_ji.P_phi, cs_ji.U, cs_ji.Y, cs_ji.V = bwd
    cs_ij.k += 1
    cs_ji.k += 1
    return cs_ij, cs_ji
