"""Gaussian mixture fitted by EM, used to seed the HMM emissions."""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import DataError
from .gaussian import logpdf_rows, regularize, weighted_moments
from .observation import as_matrix

log = logging.getLogger(__name__)

EMPTY_COMPONENT = 1e-10
TIE_TOL = 1e-12
# eps lower bound relative to the pooled variance; only bites for collapsed components
COLLAPSE_FLOOR = 1e-10


@dataclass(frozen=True, eq=False)
class GmmParams:
    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray

    @property
    def n_components(self):
        return self.weights.shape[0]

    def permuted(self, order):
        order = np.asarray(order)
        return GmmParams(self.weights[order], self.means[order], self.covariances[order])


def component_log_densities(params, X):
    """``log w_k + log N(x_t | mu_k, Sigma_k)`` as a T x K array."""
    X = as_matrix(X)
    cols = [
        np.log(params.weights[k]) + logpdf_rows(X, params.means[k], params.covariances[k], f"component {k} covariance")
        for k in range(params.n_components)
    ]
    return np.column_stack(cols)


def hard_assign(params, obs):
    """Most probable component per row; ties go to the lower index."""
    X = as_matrix(obs)
    if X.shape[1] != params.means.shape[1]:
        raise DataError(f"observation dimension {X.shape[1]} != model dimension {params.means.shape[1]}")
    return np.argmax(component_log_densities(params, X), axis=1)


def _farthest_point_centres(Z, k, rng):
    centres = [int(rng.integers(Z.shape[0]))]
    d2 = np.sum((Z - Z[centres[0]]) ** 2, axis=1)
    for _ in range(1, k):
        nxt = int(np.argmax(d2))
        centres.append(nxt)
        d2 = np.minimum(d2, np.sum((Z - Z[nxt]) ** 2, axis=1))
    return centres


def _m_step(X, resp, floor, diagonal):
    nk = resp.sum(axis=0)
    K, d = resp.shape[1], X.shape[1]
    means = np.empty((K, d))
    covs = np.empty((K, d, d))
    for k in range(K):
        means[k], cov = weighted_moments(X, resp[:, k])
        if diagonal:
            cov = np.diag(np.diag(cov))
        covs[k] = regularize(cov, floor)
    return GmmParams(nk / nk.sum(), means, covs)


def _lloyd(Z, centres, max_iter=100):
    """k-means refinement of the seed points; returns hard labels."""
    C = Z[centres]
    labels = None
    for _ in range(max_iter):
        d2 = np.sum(Z * Z, axis=1)[:, None] - 2.0 * Z @ C.T + np.sum(C * C, axis=1)[None, :]
        new = np.argmin(d2, axis=1)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for k in range(C.shape[0]):
            members = labels == k
            if members.any():
                C[k] = Z[members].mean(axis=0)
    return labels


def _em(X, K, rng, max_iter, tol, floor, diagonal):
    T = X.shape[0]
    scale = X.std(axis=0)
    Z = (X - X.mean(axis=0)) / np.where(scale > 0, scale, 1.0)
    centres = _farthest_point_centres(Z, K, rng)
    labels = _lloyd(Z, centres)
    resp = np.zeros((T, K))
    resp[np.arange(T), labels] = 1.0
    for k in np.flatnonzero(resp.sum(axis=0) == 0):
        resp[centres[k], :] = 0.0
        resp[centres[k], k] = 1.0
    params = _m_step(X, resp, floor, diagonal)

    trace = []
    for _ in range(max_iter):
        logp = component_log_densities(params, X)
        norm = logsumexp(logp, axis=1)
        trace.append(float(norm.sum()))
        if len(trace) > 1 and (trace[-1] - trace[-2]) < tol * abs(trace[-2]):
            break
        resp = np.exp(logp - norm[:, None])
        empty = np.flatnonzero(resp.sum(axis=0) < EMPTY_COMPONENT * T)
        for k in empty:
            worst = int(np.argmin(norm))
            log.warning("mixture component %d emptied; re-seeding from frame %d", k, worst)
            resp[worst, :] = 0.0
            resp[worst, k] = 1.0
        params = _m_step(X, resp, floor, diagonal)
    else:
        trace.append(float(logsumexp(component_log_densities(params, X), axis=1).sum()))
    return params, trace


def fit_gmm(obs, K, seed=0, max_iter=200, tol=1e-6, n_restarts=5, covariance_type="full"):
    """EM for a K-component Gaussian mixture.

    Initial partition: farthest-point seeds on z-scored data, refined by
    k-means, then one M-step on the hard labels.

    Restart ``r`` draws its first seed point with ``seed + r``; the restart
    with the highest final log-likelihood wins (ties to the lowest index).
    Stops when the relative log-likelihood gain falls below ``tol``. The
    trace is non-decreasing except across an empty-component re-seed, which
    is logged.

    Returns ``(params, loglik_trace)``.
    """
    X = as_matrix(obs)
    T = X.shape[0]
    if not 1 <= K <= T:
        raise DataError(f"need 1 <= K <= T, got K={K}, T={T}")
    if covariance_type not in ("full", "diag"):
        raise DataError(f"covariance_type must be 'full' or 'diag', got {covariance_type!r}")
    d = X.shape[1]
    total_var = np.trace(np.atleast_2d(np.cov(X.T, bias=True)))
    floor = COLLAPSE_FLOOR * max(total_var / d, 1e-300)
    best = None
    for r in range(max(1, n_restarts)):
        rng = np.random.default_rng(seed + r)
        params, trace = _em(X, K, rng, max_iter, tol, floor, covariance_type == "diag")
        if best is None or trace[-1] > best[1][-1] + TIE_TOL:
            best = (params, trace)
    return best
