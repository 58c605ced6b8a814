"""Small linear-algebra helpers used by the estimator recursions."""

import warnings

import numpy as np
import scipy.linalg

from .errors import ConfigurationError, EstimatorError

# Relative asymmetry above which a covariance is considered suspect.
SYMMETRY_RTOL = 1e-10


def symmetrize(M):
    """Return the symmetric part (M + M^T) / 2."""
    return 0.5 * (M + M.T)


def asymmetry(M):
    """Relative asymmetry ||M - M^T|| / max(||M||, 1)."""
    return np.linalg.norm(M - M.T) / max(np.linalg.norm(M), 1.0)


def load_covariance(M, name, rtol=SYMMETRY_RTOL):
    """Coerce a user-supplied covariance to a symmetric float array.

    Asymmetry beyond `rtol` is repaired by averaging with the transpose and
    reported as a warning, not an error: configuration files routinely carry
    rounded entries.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1]:
        raise ConfigurationError(f"{name} must be square, got shape {M.shape}")
    if asymmetry(M) > rtol:
        warnings.warn(f"{name} is not symmetric (relative asymmetry "
                      f"{asymmetry(M):.2e}); symmetrizing", stacklevel=2)
    return symmetrize(M)


def require_symmetric(M, name, rtol=SYMMETRY_RTOL):
    """Validate symmetry strictly; used for estimator initial conditions."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1]:
        raise ConfigurationError(f"{name} must be square, got shape {M.shape}")
    if asymmetry(M) > rtol:
        raise ConfigurationError(f"{name} must be symmetric "
                                 f"(relative asymmetry {asymmetry(M):.2e})")
    return symmetrize(M)


def psd_factor(M, name, rtol=1e-10):
    """Factor L of a symmetric PSD matrix with L @ L.T == M.

    Small negative eigenvalues within `rtol` of the spectral radius are
    clipped to zero; anything more negative is a configuration error.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return M.copy()
    w, v = np.linalg.eigh(symmetrize(M))
    scale = max(abs(w[-1]), 1.0)
    if w[0] < -rtol * scale:
        raise ConfigurationError(
            f"{name} is not positive semidefinite (min eigenvalue {w[0]:.3e})")
    return v @ np.diag(np.sqrt(np.clip(w, 0.0, None)))


def pd_solve(S, B, context, step=None):
    """Solve S @ X = B for symmetric positive-definite S.

    S is symmetrized before the Cholesky solve. Failure raises
    EstimatorError carrying a condition estimate, never a silent
    pseudo-inverse fallback.
    """
    S = symmetrize(S)
    try:
        c, low = scipy.linalg.cho_factor(S, check_finite=False)
        return scipy.linalg.cho_solve((c, low), B, check_finite=False)
    except scipy.linalg.LinAlgError:
        cond = float(np.linalg.cond(S))
        raise EstimatorError(f"{context} is numerically singular",
                             cond=cond, step=step) from None


def is_psd(M, tol=1e-9):
    """Whether the symmetric part of M has eigenvalues >= -tol * scale."""
    w = np.linalg.eigvalsh(symmetrize(M))
    return bool(w[0] >= -tol * max(abs(w[-1]), 1.0))
