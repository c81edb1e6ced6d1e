"""Gaussian-emission hidden Markov model: inference, training and chain analytics.

Forward-backward uses per-step scaling: emission densities are shifted by
their per-frame maximum in log space, the forward vector is renormalized at
every step, and the log-likelihood is recovered from the accumulated scale
factors. Viterbi and :func:`joint_log_prob` work directly in log space, where
a zero probability is ``-inf``.

State indices tie-break toward the lower index everywhere.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import DataError, NumericalError
from .gaussian import logpdf_rows, regularize, weighted_moments
from .observation import Standardizer, as_matrix

log = logging.getLogger(__name__)

STATE_LABELS = ("Transient", "Stable", "Extinction")
STOCHASTIC_TOL = 1e-9
RENORMALIZE_TOL = 0.02
TRANSITION_FLOOR = 1e-12
MIN_OCCUPANCY = 1e-8
COLLAPSE_FLOOR = 1e-10


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


def renormalize_rows(A, tol=RENORMALIZE_TOL):
    """Rescale rows summing to within ``tol`` of one.

    Returns ``(matrix, changed)``. Rows further off raise :class:`DataError`.
    """
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DataError(f"transition matrix must be square, got shape {A.shape}")
    if np.any(A < 0) or not np.all(np.isfinite(A)):
        raise DataError("transition matrix has negative or non-finite entries")
    sums = A.sum(axis=1)
    off = np.abs(sums - 1.0)
    if np.any(off > tol):
        i = int(np.argmax(off))
        raise DataError(f"transition row {i} sums to {sums[i]!r}; more than {tol} away from 1")
    changed = bool(np.any(off > 0))
    if changed and np.any(off > STOCHASTIC_TOL):
        log.warning("renormalized transition rows with sums %s", np.array2string(sums, precision=6))
    return A / sums[:, None], changed


@dataclass(frozen=True, eq=False)
class HmmParams:
    """``initial`` (K), ``transition`` (K x K), Gaussian ``means`` (K x d) and
    ``covariances`` (K x d x d).

    ``structural_zeros`` marks transitions pinned to exactly zero; training
    keeps them at zero and floors every other entry at ``TRANSITION_FLOOR``.
    """

    initial: np.ndarray
    transition: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    state_labels: tuple = None
    structural_zeros: np.ndarray = None

    def __post_init__(self):
        pi = np.array(self.initial, dtype=float).reshape(-1)
        A = np.array(self.transition, dtype=float)
        K = pi.size
        means = np.array(self.means, dtype=float).reshape(K, -1)
        d = means.shape[1]
        covs = np.array(self.covariances, dtype=float).reshape(K, d, d)
        if A.shape != (K, K):
            raise DataError(f"transition shape {A.shape} does not match {K} states")
        if np.any(pi < 0) or abs(pi.sum() - 1.0) > STOCHASTIC_TOL:
            raise DataError(f"initial distribution must be non-negative and sum to 1, got {pi}")
        if np.any(A < 0) or np.any(np.abs(A.sum(axis=1) - 1.0) > STOCHASTIC_TOL):
            raise DataError("transition matrix must be row-stochastic within 1e-9")
        labels = self.state_labels
        if labels is None:
            labels = STATE_LABELS if K == 3 else tuple(f"S{k}" for k in range(K))
        if len(labels) != K:
            raise DataError(f"{len(labels)} state labels for {K} states")
        zeros = np.zeros((K, K), bool) if self.structural_zeros is None else np.array(self.structural_zeros, bool)
        if np.any(A[zeros] != 0):
            raise DataError("structural zeros must have zero transition probability")
        object.__setattr__(self, "initial", _frozen(pi))
        object.__setattr__(self, "transition", _frozen(A))
        object.__setattr__(self, "means", _frozen(means))
        object.__setattr__(self, "covariances", _frozen(covs))
        object.__setattr__(self, "state_labels", tuple(str(s) for s in labels))
        object.__setattr__(self, "structural_zeros", _frozen(zeros, bool))

    @property
    def n_states(self):
        return self.initial.size

    @property
    def dim(self):
        return self.means.shape[1]

    def replace(self, **changes):
        fields = dict(
            initial=self.initial,
            transition=self.transition,
            means=self.means,
            covariances=self.covariances,
            state_labels=self.state_labels,
            structural_zeros=self.structural_zeros,
        )
        fields.update(changes)
        return HmmParams(**fields)


class PosteriorSet(NamedTuple):
    gamma: np.ndarray
    xi: np.ndarray
    loglik: float


class StatePath(NamedTuple):
    states: np.ndarray
    log_joint: float


class AlarmResult(NamedTuple):
    probability: float
    fired: bool


def emission_logpdf(v, mean, cov, state=None):
    """Log density of ``N(mean, cov)`` at ``v``."""
    name = "covariance" if state is None else f"state {state} covariance"
    return float(logpdf_rows(np.reshape(v, (1, -1)), np.ravel(mean), np.atleast_2d(cov), name)[0])


def emission_log_matrix(obs, params):
    X = as_matrix(obs)
    if X.shape[1] != params.dim:
        raise DataError(f"observation dimension {X.shape[1]} != model dimension {params.dim}")
    return np.column_stack([
        logpdf_rows(X, params.means[k], params.covariances[k], f"state {k} ({params.state_labels[k]}) covariance")
        for k in range(params.n_states)
    ])


def _scaled_emissions(log_b):
    shift = log_b.max(axis=1)
    bad = np.flatnonzero(~np.isfinite(shift))
    if bad.size:
        raise NumericalError(f"frame {bad[0]}: every state has zero emission density")
    return np.exp(log_b - shift[:, None]), shift


def forward_backward(obs, params):
    """Posterior state occupancies ``gamma`` (T x K), pairwise transition
    posteriors ``xi`` (T-1 x K x K) and ``ln P(V | params)``."""
    log_b = emission_log_matrix(obs, params)
    B, shift = _scaled_emissions(log_b)
    T, K = B.shape
    A = params.transition
    alpha = np.empty((T, K))
    scale = np.empty(T)
    a = params.initial * B[0]
    for t in range(T):
        if t:
            a = (alpha[t - 1] @ A) * B[t]
        c = a.sum()
        if not c > 0:
            raise NumericalError(f"frame {t}: observation sequence has zero probability under the model")
        scale[t] = c
        alpha[t] = a / c
    beta = np.empty((T, K))
    beta[-1] = 1.0
    for t in range(T - 2, -1, -1):
        beta[t] = A @ (B[t + 1] * beta[t + 1]) / scale[t + 1]
    gamma = alpha * beta
    gamma /= gamma.sum(axis=1, keepdims=True)
    if T > 1:
        xi = alpha[:-1, :, None] * A[None] * (B[1:] * beta[1:])[:, None, :] / scale[1:, None, None]
        xi /= xi.sum(axis=(1, 2), keepdims=True)
    else:
        xi = np.empty((0, K, K))
    loglik = float(np.log(scale).sum() + shift.sum())
    return PosteriorSet(gamma, xi, loglik)


def _log(x):
    with np.errstate(divide="ignore"):
        return np.log(x)


def joint_log_prob(obs, path, params):
    """``ln pi[z1] + sum ln A[z(t-1), z(t)] + sum ln N(v_t | z_t)``; ``-inf``
    when the path uses a zero-probability start or transition."""
    X = as_matrix(obs)
    path = np.asarray(path, dtype=int)
    if path.shape[0] != X.shape[0]:
        raise DataError(f"path length {path.shape[0]} != sequence length {X.shape[0]}")
    if np.any(path < 0) or np.any(path >= params.n_states):
        raise DataError("path contains an invalid state index")
    log_pi = _log(params.initial[path[0]])
    log_a = _log(params.transition[path[:-1], path[1:]]).sum()
    if not np.isfinite(log_pi + log_a):
        return -np.inf
    log_b = emission_log_matrix(X, params)
    return float(log_pi + log_a + log_b[np.arange(len(path)), path].sum())


def viterbi(obs, params):
    """Most probable state path by dynamic programming in log space."""
    log_b = emission_log_matrix(obs, params)
    if np.any(~np.isfinite(log_b.max(axis=1))):
        bad = int(np.flatnonzero(~np.isfinite(log_b.max(axis=1)))[0])
        raise NumericalError(f"frame {bad}: every state has zero emission density")
    T, K = log_b.shape
    log_a = _log(params.transition)
    delta = _log(params.initial) + log_b[0]
    back = np.zeros((T, K), dtype=int)
    for t in range(1, T):
        scores = delta[:, None] + log_a
        back[t] = np.argmax(scores, axis=0)
        delta = scores[back[t], np.arange(K)] + log_b[t]
    states = np.empty(T, dtype=int)
    states[-1] = int(np.argmax(delta))
    best = float(delta[states[-1]])
    if not np.isfinite(best):
        raise NumericalError("no state path has non-zero probability")
    for t in range(T - 1, 0, -1):
        states[t - 1] = back[t, states[t]]
    return StatePath(states, best)


def _update_transition(xi_sum, gamma_sum, old, zeros):
    A = old.copy()
    ok = gamma_sum > 0
    A[ok] = xi_sum[ok] / gamma_sum[ok, None]
    A = np.where(zeros, 0.0, np.maximum(A, TRANSITION_FLOOR))
    return A / A.sum(axis=1, keepdims=True)


def baum_welch(obs, init, tol=1e-6, max_iter=200, update_emissions=True):
    """Maximum-likelihood EM re-estimation of all HMM parameters.

    Stops when the relative log-likelihood gain drops below ``tol`` or after
    ``max_iter`` re-estimations. With ``update_emissions=False`` the Gaussian
    emissions stay fixed and only ``initial`` and ``transition`` are trained.

    Returns ``(params, loglik_trace)`` where ``loglik_trace[i]`` is the
    log-likelihood of the i-th parameter set and the last entry belongs to
    the returned parameters.
    """
    X = as_matrix(obs)
    d = X.shape[1]
    total_var = np.trace(np.atleast_2d(np.cov(X.T, bias=True))) if X.shape[0] > 1 else 1.0
    floor = COLLAPSE_FLOOR * max(total_var / d, 1e-300)
    params = init
    trace = []
    for it in range(max_iter + 1):
        post = forward_backward(X, params)
        trace.append(post.loglik)
        if len(trace) > 1 and trace[-1] - trace[-2] < tol * abs(trace[-2]):
            break
        if it == max_iter:
            break
        params = _m_step(X, post, params, floor, update_emissions)
    return params, trace


def _m_step(X, post, params, floor, update_emissions):
    gamma, xi = post.gamma, post.xi
    pi = gamma[0] / gamma[0].sum()
    if xi.shape[0]:
        A = _update_transition(xi.sum(axis=0), gamma[:-1].sum(axis=0), params.transition, params.structural_zeros)
    else:
        A = params.transition
    means = params.means.copy()
    covs = params.covariances.copy()
    if update_emissions:
        occupancy = gamma.sum(axis=0)
        for k in range(params.n_states):
            if occupancy[k] < MIN_OCCUPANCY:
                log.warning("state %d occupancy %.3g below %g; emission parameters frozen", k, occupancy[k], MIN_OCCUPANCY)
                continue
            means[k], cov = weighted_moments(X, gamma[:, k])
            covs[k] = regularize(cov, floor)
    return params.replace(initial=pi, transition=A, means=means, covariances=covs)


def _is_irreducible(A):
    K = A.shape[0]
    adj = A > 0
    for start in range(K):
        seen = np.zeros(K, bool)
        seen[start] = True
        frontier = [start]
        while frontier:
            nxt = np.flatnonzero(adj[frontier].any(axis=0) & ~seen)
            seen[nxt] = True
            frontier = list(nxt)
        if not seen.all():
            return False
    return True


def stationary_distribution(A, tol=1e-12, max_iter=100_000):
    """Long-run state distribution ``pi* A = pi*`` by power iteration.

    Iterates ``x <- x A`` from state 0 until the largest entry change is
    below ``tol``. Reducible chains and chains that fail to converge (for
    example periodic ones) raise :class:`NumericalError`.
    """
    A, _ = renormalize_rows(A)
    if not _is_irreducible(A):
        raise NumericalError("transition matrix is reducible; stationary distribution is not unique")
    x = np.zeros(A.shape[0])
    x[0] = 1.0
    for _ in range(max_iter):
        nxt = x @ A
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - x)) < tol:
            return nxt
        x = nxt
    raise NumericalError(f"power iteration did not converge in {max_iter} iterations (periodic chain?)")


def n_step_prediction(A, delta):
    """``A ** delta`` by repeated squaring."""
    A = np.asarray(A, dtype=float)
    delta = int(delta)
    if delta < 0:
        raise DataError(f"delta must be >= 0, got {delta}")
    result = np.eye(A.shape[0])
    base = A.copy()
    while delta:
        if delta & 1:
            result = result @ base
        delta >>= 1
        if delta:
            base = base @ base
    return result


def instability_alarm(A, current_state, delta, theta, extinction_state=2):
    """Probability of being in the extinction state ``delta`` steps ahead;
    the alarm fires when it strictly exceeds ``theta``."""
    A = np.asarray(A, dtype=float)
    K = A.shape[0]
    if not 0 <= current_state < K or not 0 <= extinction_state < K:
        raise DataError("state index out of range")
    if not 0.0 <= theta <= 1.0:
        raise DataError(f"theta must be in [0, 1], got {theta}")
    p = float(n_step_prediction(A, delta)[current_state, extinction_state])
    return AlarmResult(p, p > theta)


def label_states(params):
    """Order model states as Transient, Stable, Extinction.

    States are sorted by ascending mean of the first (energy) feature; equal
    energies put the higher-entropy state first. Returns ``order`` such that
    ``order[i]`` is the model state that receives label ``i``.
    """
    if params.n_states != 3:
        raise DataError(f"regime labelling needs exactly 3 states, got {params.n_states}")
    energy = params.means[:, 0]
    entropy = params.means[:, 1] if params.dim > 1 else np.zeros(3)
    return np.lexsort((-entropy, energy))


def relabel(params, order, labels=STATE_LABELS):
    """Permute every state-indexed parameter so model state ``order[i]`` becomes state ``i``."""
    order = np.asarray(order)
    return HmmParams(
        initial=params.initial[order],
        transition=params.transition[np.ix_(order, order)],
        means=params.means[order],
        covariances=params.covariances[order],
        state_labels=tuple(labels) if labels is not None else tuple(params.state_labels[i] for i in order),
        structural_zeros=params.structural_zeros[np.ix_(order, order)],
    )


def init_from_gmm(gmm_params, self_transition=0.9, labels=None):
    """HMM starting point from a fitted mixture.

    Components are sorted by ascending energy mean (ties: higher entropy
    first); emissions are copied, ``initial`` takes the mixture weights and
    the transition matrix has ``self_transition`` on the diagonal with the
    remaining mass spread evenly.
    """
    K = gmm_params.n_components
    energy = gmm_params.means[:, 0]
    entropy = gmm_params.means[:, 1] if gmm_params.means.shape[1] > 1 else np.zeros(K)
    order = np.lexsort((-entropy, energy))
    if K == 1:
        A = np.ones((1, 1))
    else:
        A = np.full((K, K), (1.0 - self_transition) / (K - 1))
        np.fill_diagonal(A, self_transition)
    w = gmm_params.weights[order]
    return HmmParams(w / w.sum(), A, gmm_params.means[order], gmm_params.covariances[order], labels)


# model text file

def _fmt(values):
    return " ".join(format(float(v), ".17g") for v in np.ravel(values))


def save_model(path, params, standardizer=None, conventions=None):
    """Write a model as ``key = values`` lines (17 significant digits)."""
    K, d = params.n_states, params.dim
    lines = [
        "# arcregime Gaussian HMM",
        "format_version = 1",
        f"n_states = {K}",
        f"n_features = {d}",
        "state_labels = " + " ".join(params.state_labels),
        "initial = " + _fmt(params.initial),
    ]
    lines += [f"transition[{i}] = " + _fmt(params.transition[i]) for i in range(K)]
    lines += [f"structural_zeros[{i}] = " + " ".join(str(int(z)) for z in params.structural_zeros[i]) for i in range(K)]
    for k in range(K):
        lines.append(f"mean[{k}] = " + _fmt(params.means[k]))
        lines.append(f"covariance[{k}] = " + _fmt(params.covariances[k]))
    if standardizer is not None:
        lines.append("scaler_means = " + _fmt(standardizer.means))
        lines.append("scaler_stds = " + _fmt(standardizer.stds))
    for key, value in sorted((conventions or {}).items()):
        lines.append(f"convention.{key} = {value}")
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)


def load_model(path):
    """Inverse of :func:`save_model`.

    Returns ``(params, standardizer_or_None, conventions)``; convention values
    come back as strings.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"model file not found: {path}")
    entries = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        entries[key] = value
    try:
        K = int(entries["n_states"])
        d = int(entries["n_features"])

        def nums(key):
            return np.array([float(x) for x in entries[key].split()])

        params = HmmParams(
            initial=nums("initial"),
            transition=np.stack([nums(f"transition[{i}]") for i in range(K)]),
            means=np.stack([nums(f"mean[{k}]") for k in range(K)]),
            covariances=np.stack([nums(f"covariance[{k}]").reshape(d, d) for k in range(K)]),
            state_labels=tuple(entries["state_labels"].split()),
            structural_zeros=np.stack([nums(f"structural_zeros[{i}]") for i in range(K)]).astype(bool)
            if "structural_zeros[0]" in entries else None,
        )
    except (KeyError, ValueError) as exc:
        raise DataError(f"{path}: malformed model file ({exc})") from None
    scaler = None
    if "scaler_means" in entries:
        stds = nums("scaler_stds")
        scaler = Standardizer(nums("scaler_means"), stds)
    conventions = {k[len("convention."):]: v for k, v in entries.items() if k.startswith("convention.")}
    return params, scaler, conventions
