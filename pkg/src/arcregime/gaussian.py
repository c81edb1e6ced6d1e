"""Multivariate normal helpers shared by the mixture and the HMM."""

import numpy as np
from scipy.linalg import solve_triangular

from .errors import NumericalError

LOG_2PI = np.log(2.0 * np.pi)
REG_SCALE = 1e-6


def regularize(cov, floor=0.0):
    """Symmetrize ``cov`` and add ``eps * I`` with ``eps = 1e-6 * trace / d``.

    ``floor`` is a lower bound on ``eps`` so collapsed (zero-trace) covariances
    stay positive definite.
    """
    cov = np.asarray(cov, dtype=float)
    d = cov.shape[0]
    cov = 0.5 * (cov + cov.T)
    eps = max(REG_SCALE * np.trace(cov) / d, floor)
    return cov + eps * np.eye(d)


def cholesky(cov, name="covariance"):
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise NumericalError(f"{name} is not symmetric positive definite") from None


def logpdf_rows(X, mean, cov, name="covariance"):
    """Log N(x | mean, cov) for every row of ``X`` via a Cholesky factor."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    L = cholesky(np.asarray(cov, dtype=float), name)
    d = L.shape[0]
    diff = (X - mean).T
    z = solve_triangular(L, diff, lower=True)
    maha = np.sum(z * z, axis=0)
    log_det = 2.0 * np.sum(np.log(np.diag(L)))
    return -0.5 * (d * LOG_2PI + log_det + maha)


def weighted_moments(X, weights):
    """Weighted mean and population covariance; ``weights`` need not sum to one."""
    w = np.asarray(weights, dtype=float)
    total = w.sum()
    mean = w @ X / total
    diff = X - mean
    cov = (diff * w[:, None]).T @ diff / total
    return mean, cov
