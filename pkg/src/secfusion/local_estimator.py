"""Joint recursive estimation of augmented state and attack increment.

Each weak sensor gets one estimator over the augmented state [x; theta] with
the attack increment phi = theta(k) - theta(k-1) treated as an unknown
input. Per step the estimator:

  1. forms the one-step prediction second moments (compute_xi),
  2. solves for the optimal state and input gains (compute_gains),
  3. corrects the estimates with the innovation (innovate_and_update),
  4. advances the covariance quadruple P_X, P_phi, U, V
     (propagate_covariances).

The unknown second moment of the attack is replaced by eta * I, a
nonnegative compensation factor; eta = 0 reduces the whole recursion to a
standard Kalman filter on the augmented system.

State covariance P_X tracks E{X~ X~^T}, input covariance P_phi tracks
E{phi~ phi~^T}, U tracks E{X~ phi_hat^T} and V tracks E{phi_hat phi_hat^T};
all four are needed because the input estimate is correlated with the state
error once the gains close the loop.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .linalg import pd_solve, require_symmetric, symmetrize


@dataclass
class XiTriple:
    """One-step prediction second moments formed from step k-1 quantities.

    Xi is the predicted augmented-state covariance including the unknown
    input compensation; Xi1 the compensated second moment of the combined
    input error; Xi2 the state/input cross term.
    """

    Xi: np.ndarray
    Xi1: np.ndarray
    Xi2: np.ndarray


@dataclass
class GainPair:
    """State gain K and input gain Gamma for one step."""

    K: np.ndarray
    Gamma: np.ndarray


@dataclass
class Innovation:
    """Measurement minus its one-step prediction."""

    y_tilde: np.ndarray


@dataclass
class LocalInit:
    """Optional overrides for the estimator initial conditions."""

    X_hat0: np.ndarray = None
    phi_hat0: np.ndarray = None
    P_X0: np.ndarray = None
    P_phi0: np.ndarray = None
    U0: np.ndarray = None
    V0: np.ndarray = None


@dataclass
class LocalEstimatorState:
    """Mutable per-sensor estimator state, stepped sequentially in k.

    K_prev / Gamma_prev / C_a_prev hold the previous step's gains and
    measurement matrix; the complements they induce are recomputed on use
    rather than cached so time-varying measurement matrices stay correct.
    """

    weak_id: int
    n: int
    p: int
    m: int
    eta: object           # float, or 1-D array indexed by step
    X_hat: np.ndarray
    phi_hat: np.ndarray
    P_X: np.ndarray
    P_phi: np.ndarray
    U: np.ndarray
    V: np.ndarray
    K_prev: np.ndarray
    Gamma_prev: np.ndarray
    C_a_prev: np.ndarray
    k: int = 0

    def eta_at(self, k):
        if np.ndim(self.eta) == 0:
            return float(self.eta)
        seq = np.asarray(self.eta, dtype=float)
        if k >= len(seq):
            raise ConfigurationError(
                f"eta sequence for sensor {self.weak_id} has {len(seq)} "
                f"entries, step {k} requested")
        return float(seq[k])


def init_local(aug, init=None, eta=1.0, weak_id=None):
    """Build the initial estimator state for one augmented subsystem.

    Defaults: zero estimates, identity P_X and P_phi, zero U, V, and zero
    step-0 gains (so the step-1 recursion sees identity complements).
    """
    n, p = aug.n, aug.p
    d = n + p
    init = init or LocalInit()

    def _vec(value, default, length, name):
        if value is None:
            return default
        v = np.asarray(value, dtype=float).reshape(-1)
        if v.shape != (length,):
            raise ConfigurationError(
                f"{name} must have length {length}, got shape {v.shape}")
        return v.copy()

    def _cov(value, default, dim, name):
        if value is None:
            return default
        M = require_symmetric(value, name)
        if M.shape != (dim, dim):
            raise ConfigurationError(
                f"{name} must be {dim}x{dim}, got {M.shape}")
        return M

    def _mat(value, default, shape, name):
        if value is None:
            return default
        M = np.atleast_2d(np.asarray(value, dtype=float))
        if M.shape != shape:
            raise ConfigurationError(
                f"{name} must have shape {shape}, got {M.shape}")
        return M.copy()

    eta_arr = np.asarray(eta, dtype=float)
    if np.any(eta_arr < 0):
        raise ConfigurationError("compensation factor eta must be >= 0")

    return LocalEstimatorState(
        weak_id=weak_id, n=n, p=p, m=aug.m, eta=eta,
        X_hat=_vec(init.X_hat0, np.zeros(d), d, "X_hat0"),
        phi_hat=_vec(init.phi_hat0, np.zeros(p), p, "phi_hat0"),
        P_X=_cov(init.P_X0, np.eye(d), d, "P_X0"),
        P_phi=_cov(init.P_phi0, np.eye(p), p, "P_phi0"),
        U=_mat(init.U0, np.zeros((d, p)), (d, p), "U0"),
        V=_cov(init.V0, np.zeros((p, p)), p, "V0"),
        K_prev=np.zeros((d, aug.m)),
        Gamma_prev=np.zeros((p, aug.m)),
        C_a_prev=aug.C_a.copy(),
    )


def _prev_complements(state, aug):
    """Complements of the previous step's gains: I - Gamma C Phi, I - K C."""
    p, d = state.p, state.n + state.p
    Gamma_a_prev = np.eye(p) - state.Gamma_prev @ state.C_a_prev @ aug.Phi_a
    K_a_prev = np.eye(d) - state.K_prev @ state.C_a_prev
    return Gamma_a_prev, K_a_prev


def compute_xi(state, aug):
    """Prediction second moments for step k from the step k-1 state."""
    eta = state.eta_at(state.k + 1)
    A_a, Phi_a, Q_a = aug.A_a, aug.Phi_a, aug.Q_a
    Gamma_a_prev, K_a_prev = _prev_complements(state, aug)

    Xi1 = (6.0 * eta * np.eye(state.p) - state.P_phi
           - eta * Gamma_a_prev.T - eta * Gamma_a_prev)
    Xi1 = symmetrize(Xi1)
    Xi2 = state.U + eta * (K_a_prev @ Phi_a)
    AXi2 = A_a @ Xi2
    Xi = (A_a @ state.P_X @ A_a.T + Q_a
          + Phi_a @ Xi1 @ Phi_a.T
          - AXi2 @ Phi_a.T - Phi_a @ AXi2.T)
    return XiTriple(Xi=symmetrize(Xi), Xi1=Xi1, Xi2=Xi2)


def compute_gains(state, xi, aug):
    """Optimal state and input gains for step k.

    Both gains share the innovation covariance S = C Xi C^T + R, which is
    symmetrized and solved as positive definite; a singular S surfaces as an
    EstimatorError with a condition estimate.
    """
    eta = state.eta_at(state.k + 1)
    A_a, Phi_a, C_a = aug.A_a, aug.Phi_a, aug.C_a
    Gamma_a_prev, K_a_prev = _prev_complements(state, aug)

    bracket = (state.P_phi @ Phi_a.T
               + state.U.T @ A_a.T
               + eta * Gamma_a_prev @ Phi_a.T
               + eta * (Phi_a @ Gamma_a_prev).T
               + eta * (A_a @ K_a_prev @ Phi_a).T
               - 6.0 * eta * Phi_a.T)

    S = C_a @ xi.Xi @ C_a.T + aug.R
    d = state.n + state.p
    # One factorization serves both gains: K = Xi C^T S^-1 and
    # Gamma = -bracket C^T S^-1, solved through the transposes.
    rhs = C_a @ np.hstack([xi.Xi, bracket.T])
    sol = pd_solve(S, rhs, "innovation covariance", step=state.k + 1)
    K = sol[:, :d].T
    Gamma = -sol[:, d:].T
    return GainPair(K=K, Gamma=Gamma)


def innovate_and_update(state, gains, y, aug):
    """Correct the estimates with measurement y using the step-k gains.

    Mutates X_hat and phi_hat in place and returns the innovation. The
    covariance pass (propagate_covariances) finalizes the step.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape != (state.m,):
        raise ValueError(
            f"measurement must have length {state.m}, got shape {y.shape}")
    pred = aug.A_a @ state.X_hat + aug.Phi_a @ state.phi_hat
    y_tilde = y - aug.C_a @ pred
    state.X_hat = pred + gains.K @ y_tilde
    state.phi_hat = state.phi_hat + gains.Gamma @ y_tilde
    return Innovation(y_tilde=y_tilde)


def propagate_covariances(state, gains, xi, aug):
    """Advance P_X, P_phi, U, V to step k and retire the step's gains.

    Must run after compute_gains (and innovate_and_update, when estimates
    are being tracked) because it consumes the previous step's stored gains
    before overwriting them.
    """
    eta = state.eta_at(state.k + 1)
    A_a, Phi_a, C_a, R = aug.A_a, aug.Phi_a, aug.C_a, aug.R
    K, Gamma = gains.K, gains.Gamma
    p, d = state.p, state.n + state.p

    GC = Gamma @ C_a
    T_k = GC @ Phi_a
    T_prev = state.Gamma_prev @ state.C_a_prev @ Phi_a
    Gamma_a = np.eye(p) - T_k
    Gamma_b = GC @ A_a
    K_a = np.eye(d) - K @ C_a

    GbXi2 = Gamma_b @ xi.Xi2
    P_phi_new = (Gamma_a @ xi.Xi1 - xi.Xi1 @ T_k.T
                 + GbXi2.T + GbXi2
                 + Gamma @ R @ Gamma.T
                 + GC @ xi.Xi @ GC.T)

    P_X_new = K_a @ xi.Xi @ K_a.T + K @ R @ K.T

    U_new = (K_a @ (A_a @ state.U - Phi_a @ state.V)
             - eta * (K_a @ Phi_a) @ T_prev.T
             - K @ R @ Gamma.T
             + K_a @ xi.Xi @ GC.T)

    GbU = Gamma_b @ state.U
    V_new = (GbU.T + GbU
             + state.V @ Gamma_a.T - T_k @ state.V
             - eta * T_prev @ T_k.T - eta * T_k @ T_prev.T
             + Gamma @ (C_a @ xi.Xi @ C_a.T + R) @ Gamma.T)

    state.P_phi = symmetrize(P_phi_new)
    state.P_X = symmetrize(P_X_new)
    state.U = U_new
    state.V = symmetrize(V_new)
    state.K_prev = K.copy()
    state.Gamma_prev = Gamma.copy()
    state.C_a_prev = C_a.copy()
    state.k += 1
    return state


def extract_estimates(state):
    """Split the augmented estimate into state and attack parts."""
    return state.X_hat[:state.n].copy(), state.X_hat[state.n:].copy()


def px_given_gain(K, xi, aug):
    """State error covariance at an arbitrary gain K, expanded form.

    Equals the closed form K_a Xi K_a^T + K R K^T for every K; exposed
    separately so gain optimality can be checked by direct evaluation at
    perturbed gains.
    """
    C_a, R = aug.C_a, aug.R
    KC = K @ C_a
    return (xi.Xi - KC @ xi.Xi - xi.Xi @ KC.T
            + K @ (C_a @ xi.Xi @ C_a.T + R) @ K.T)


def pphi_given_gain(Gamma, xi, aug):
    """Input error covariance at an arbitrary gain Gamma.

    Direct evaluation of the step-update expression with the complements
    recomputed from the supplied gain.
    """
    A_a, Phi_a, C_a, R = aug.A_a, aug.Phi_a, aug.C_a, aug.R
    p = Phi_a.shape[1]
    GC = Gamma @ C_a
    T = GC @ Phi_a
    Gamma_a = np.eye(p) - T
    Gamma_b = GC @ A_a
    GbXi2 = Gamma_b @ xi.Xi2
    return (Gamma_a @ xi.Xi1 - xi.Xi1 @ T.T
            + GbXi2.T + GbXi2
            + Gamma @ R @ Gamma.T
            + GC @ xi.Xi @ GC.T)
