"""Observation sequence assembly, standardization and separability diagnostics.

Variances and covariances use the population (1/T) convention throughout.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .tfa import all_frame_features

FEATURE_NAMES = ("energy", "entropy", "centroid")


@dataclass(frozen=True, eq=False)
class ObservationSequence:
    """Feature vectors ``[energy, entropy, centroid]`` per frame (rows)."""

    vectors: np.ndarray
    frame_times: np.ndarray
    feature_names: tuple = FEATURE_NAMES
    degenerate: np.ndarray = None

    def __post_init__(self):
        V = np.array(self.vectors, dtype=float)
        if V.ndim == 1:
            V = V[:, None]
        if V.ndim != 2 or V.shape[0] < 1:
            raise DataError("observation sequence needs at least one row")
        if not np.all(np.isfinite(V)):
            raise DataError("observation sequence contains non-finite values")
        times = np.array(self.frame_times, dtype=float).reshape(-1)
        if times.size != V.shape[0]:
            raise DataError(f"{times.size} frame times for {V.shape[0]} vectors")
        flags = np.zeros(V.shape[0], bool) if self.degenerate is None else np.array(self.degenerate, bool)
        for arr in (V, times, flags):
            arr.setflags(write=False)
        object.__setattr__(self, "vectors", V)
        object.__setattr__(self, "frame_times", times)
        object.__setattr__(self, "degenerate", flags)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    def __len__(self):
        return self.vectors.shape[0]

    @property
    def dim(self):
        return self.vectors.shape[1]

    def with_vectors(self, vectors):
        return ObservationSequence(vectors, self.frame_times, self.feature_names, self.degenerate)


def as_matrix(obs):
    return obs.vectors if isinstance(obs, ObservationSequence) else np.atleast_2d(np.asarray(obs, dtype=float))


def build_observations(spectrogram):
    if spectrogram.n_frames < 1:
        raise DataError("empty spectrogram")
    energy, entropy, centroid, degenerate = all_frame_features(spectrogram)
    V = np.column_stack([energy, entropy, centroid])
    return ObservationSequence(V, spectrogram.frame_times, FEATURE_NAMES, degenerate)


@dataclass(frozen=True, eq=False)
class Standardizer:
    means: np.ndarray
    stds: np.ndarray
    constant: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.constant is None:
            object.__setattr__(self, "constant", np.zeros(len(self.means), bool))

    def transform(self, X):
        return (np.asarray(X, dtype=float) - self.means) / self.stds

    def inverse(self, Z):
        return np.asarray(Z, dtype=float) * self.stds + self.means


def standardize(obs):
    """Z-score each column; a constant column keeps std 1 and is flagged."""
    X = as_matrix(obs)
    if X.shape[0] < 2:
        raise DataError("standardize needs at least two rows")
    # detect constancy from the data, since the float mean of equal values can miss by an ulp
    constant = np.ptp(X, axis=0) == 0
    means = np.where(constant, X[0], X.mean(axis=0))
    stds = X.std(axis=0)
    constant |= ~(stds > 0)
    stds = np.where(constant, 1.0, stds)
    scaler = Standardizer(means, stds, constant)
    Z = scaler.transform(X)
    if isinstance(obs, ObservationSequence):
        return obs.with_vectors(Z), scaler
    return ObservationSequence(Z, np.arange(X.shape[0], dtype=float)), scaler


def jacobi_eigh(S, tol=1e-12, max_sweeps=100):
    """Eigen-decomposition of a small symmetric matrix by cyclic Jacobi rotations.

    Returns eigenvalues in descending order and the matching eigenvectors as
    columns. Iterates until the off-diagonal Frobenius norm drops below ``tol``
    (relative to the matrix norm when that exceeds one).
    """
    A = np.array(S, dtype=float)
    d = A.shape[0]
    V = np.eye(d)
    scale = max(1.0, np.linalg.norm(A))
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(A, -1) ** 2) * 2.0)
        if off < tol * scale:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                if A[p, q] == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * A[p, q])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                R = np.eye(d)
                R[p, p] = R[q, q] = c
                R[p, q] = s
                R[q, p] = -s
                A = R.T @ A @ R
                V = V @ R
    evals = np.diag(A).copy()
    order = np.argsort(-evals, kind="stable")
    return evals[order], V[:, order]


def pca_project(obs, n_components=2):
    """Project centred data on the leading covariance eigenvectors.

    Each component is sign-fixed so its largest-magnitude loading is positive.
    Returns ``(scores, explained_variance_ratio)``.
    """
    X = as_matrix(obs)
    T, d = X.shape
    if not 1 <= n_components <= d:
        raise DataError(f"n_components must be in [1, {d}], got {n_components}")
    if T < 2:
        raise DataError("PCA needs at least two rows")
    centred = X - X.mean(axis=0)
    cov = centred.T @ centred / T
    evals, evecs = jacobi_eigh(cov)
    evals = np.clip(evals, 0.0, None)
    for j in range(d):
        if evecs[np.argmax(np.abs(evecs[:, j])), j] < 0:
            evecs[:, j] *= -1.0
    total = evals.sum()
    ratios = evals / total if total > 0 else np.zeros(d)
    scores = centred @ evecs[:, :n_components]
    return scores, ratios[:n_components]


def silhouette_scores(obs, labels, chunk_size=1024):
    """Per-sample silhouette values and their mean (Euclidean distance).

    Members of singleton clusters score 0.
    """
    X = as_matrix(obs)
    labels = np.asarray(labels)
    if labels.shape[0] != X.shape[0]:
        raise DataError(f"{labels.shape[0]} labels for {X.shape[0]} samples")
    clusters, codes = np.unique(labels, return_inverse=True)
    if clusters.size < 2:
        raise DataError("silhouette needs at least two distinct labels")
    n = X.shape[0]
    counts = np.bincount(codes)
    onehot = np.zeros((n, clusters.size))
    onehot[np.arange(n), codes] = 1.0
    sq = np.sum(X * X, axis=1)
    scores = np.empty(n)
    for start in range(0, n, chunk_size):
        stop = min(start + chunk_size, n)
        d2 = sq[start:stop, None] + sq[None, :] - 2.0 * X[start:stop] @ X.T
        dist = np.sqrt(np.clip(d2, 0.0, None))
        dist[np.arange(stop - start), np.arange(start, stop)] = 0.0
        sums = dist @ onehot
        own = codes[start:stop]
        rows = np.arange(stop - start)
        own_count = counts[own] - 1
        a = np.divide(sums[rows, own], own_count, out=np.zeros(stop - start), where=own_count > 0)
        means = sums / counts
        means[rows, own] = np.inf
        b = means.min(axis=1)
        denom = np.maximum(a, b)
        s = np.divide(b - a, denom, out=np.zeros(stop - start), where=denom > 0)
        scores[start:stop] = np.where(own_count > 0, s, 0.0)
    return scores, float(scores.mean())
