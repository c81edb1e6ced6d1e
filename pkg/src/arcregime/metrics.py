"""Stability analytics over transition matrices and decoded state paths.

Definitions of the temporal metrics (population variance, natural log):

* ``average_state_persistence``: mean diagonal of the empirical transition
  matrix over states with at least one outgoing transition.
* ``transition_ratio``: fraction of consecutive pairs whose states differ.
* ``mean_state_duration`` / ``state_duration_variance``: mean and variance of
  the lengths of maximal constant runs.
* ``transition_entropy``: Shannon entropy of the empirical distribution of
  ordered state pairs ``(z_t, z_t+1)``, self-pairs included.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class StateStatistics:
    labels: tuple
    counts: np.ndarray
    means: np.ndarray  # K x d, NaN rows for absent states
    stds: np.ndarray

    def rows(self):
        """Table rows ``(label, count, E_mean, E_std, H_mean, H_std, C_mean, C_std)``."""
        out = []
        for k, label in enumerate(self.labels):
            vals = np.column_stack([self.means[k], self.stds[k]]).ravel()
            out.append((label, int(self.counts[k]), *map(float, vals)))
        return out


@dataclass(frozen=True)
class TemporalMetrics:
    average_state_persistence: float
    transition_entropy: float
    mean_state_duration: float
    state_duration_variance: float
    transition_ratio: float


def _check_path(path, K, min_len=1):
    path = np.asarray(path, dtype=int).reshape(-1)
    if path.size < min_len:
        raise DataError(f"path needs at least {min_len} entries, got {path.size}")
    if np.any(path < 0) or np.any(path >= K):
        raise DataError(f"path contains a state index outside [0, {K})")
    return path


def bigram_counts(path, K):
    path = _check_path(path, K, 2)
    counts = np.zeros((K, K))
    np.add.at(counts, (path[:-1], path[1:]), 1.0)
    return counts


def empirical_transition_matrix(path, K):
    """Row-normalized bigram counts and a mask of rows that had no counts.

    Rows without outgoing transitions become one-hot self loops.
    """
    counts = bigram_counts(path, K)
    totals = counts.sum(axis=1)
    unvisited = totals == 0
    A = np.divide(counts, totals[:, None], out=np.zeros_like(counts), where=~unvisited[:, None])
    A[unvisited, unvisited] = 1.0
    return A, unvisited


def transition_metrics(A, stable_state=1, extinction_state=2):
    """Per-state persistence ``A[k, k]`` and ``A[Stable, Extinction]``."""
    A = np.asarray(A, dtype=float)
    K = A.shape[0]
    if stable_state is None or extinction_state is None:
        raise DataError("Stable and Extinction states must be identified")
    if not (0 <= stable_state < K and 0 <= extinction_state < K):
        raise DataError("Stable/Extinction state index out of range")
    return np.diag(A).copy(), float(A[stable_state, extinction_state])


def state_statistics(obs, path, labels=None):
    """Per-state mean and population std of each raw feature column."""
    X = obs.vectors if hasattr(obs, "vectors") else np.atleast_2d(np.asarray(obs, dtype=float))
    path = np.asarray(path, dtype=int)
    if path.size != X.shape[0]:
        raise DataError(f"path length {path.size} != {X.shape[0]} observations")
    K = len(labels) if labels is not None else int(path.max()) + 1
    labels = tuple(labels) if labels is not None else tuple(f"S{k}" for k in range(K))
    d = X.shape[1]
    means = np.full((K, d), np.nan)
    stds = np.full((K, d), np.nan)
    counts = np.zeros(K, dtype=int)
    for k in range(K):
        rows = X[path == k]
        counts[k] = rows.shape[0]
        if rows.shape[0]:
            means[k] = rows.mean(axis=0)
            stds[k] = rows.std(axis=0)
    return StateStatistics(labels, counts, means, stds)


def run_lengths(path):
    path = np.asarray(path).reshape(-1)
    change = np.flatnonzero(path[1:] != path[:-1]) + 1
    bounds = np.concatenate([[0], change, [path.size]])
    return np.diff(bounds)


def temporal_metrics(path, K):
    path = _check_path(path, K, 2)
    counts = bigram_counts(path, K)
    A, unvisited = empirical_transition_matrix(path, K)
    persistence = float(np.mean(np.diag(A)[~unvisited]))
    n_pairs = path.size - 1
    ratio = float(np.count_nonzero(path[1:] != path[:-1]) / n_pairs)
    runs = run_lengths(path)
    p = counts[counts > 0] / n_pairs
    entropy = float(-np.sum(p * np.log(p)))
    return TemporalMetrics(
        average_state_persistence=persistence,
        transition_entropy=max(entropy, 0.0),
        mean_state_duration=float(runs.mean()),
        state_duration_variance=float(runs.var()),
        transition_ratio=ratio,
    )


def best_permutation(true_path, pred_path, K):
    """Relabeling of ``pred_path`` that maximizes agreement with ``true_path``.

    Returns ``(mapping, accuracy)`` where ``mapping[pred_state] = true_state``.
    Exhaustive over K! permutations, so only for small K.
    """
    true_path = np.asarray(true_path)
    pred_path = np.asarray(pred_path)
    if true_path.shape != pred_path.shape:
        raise DataError("paths must have equal length")
    best = (None, -1.0)
    for perm in itertools.permutations(range(K)):
        mapping = np.array(perm)
        acc = float(np.mean(mapping[pred_path] == true_path))
        if acc > best[1]:
            best = (mapping, acc)
    return best
