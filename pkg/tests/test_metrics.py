import math

import numpy as np
import pytest

from arcregime.errors import DataError
from arcregime.metrics import (
    best_permutation,
    empirical_transition_matrix,
    run_lengths,
    state_statistics,
    temporal_metrics,
    transition_metrics,
)
from arcregime.observation import build_observations
from arcregime.presets import TABLE_MEANS, TABLE_TRANSITION, normalized_table_transition, table_synthesis_spec
from arcregime.signal_io import frame_labels, sample_state_path, synthesize_arc_signal
from arcregime.tfa import stft_power
from oracles import empirical_transitions


def test_empirical_matrix_small():
    A, unvisited = empirical_transition_matrix([0, 0, 1, 1], 2)
    np.testing.assert_array_equal(A, [[0.5, 0.5], [0.0, 1.0]])
    assert not unvisited.any()


def test_empirical_matrix_constant_path():
    A, unvisited = empirical_transition_matrix([1, 1, 1], 3)
    np.testing.assert_array_equal(A, np.eye(3))
    assert unvisited.tolist() == [True, False, True]


def test_empirical_matrix_recovers_chain():
    A = normalized_table_transition()
    path = sample_state_path(A, 100_000, np.random.default_rng(3))
    emp, _ = empirical_transition_matrix(path, 3)
    np.testing.assert_allclose(emp, A, atol=0.01)
    np.testing.assert_allclose(emp, empirical_transitions(path, 3), rtol=1e-12)


def test_transition_metrics_table():
    persistence, inst = transition_metrics(TABLE_TRANSITION)
    np.testing.assert_array_equal(persistence, [0.95, 0.90, 0.87])
    assert inst == 0.10
    persistence, inst = transition_metrics(np.eye(3))
    np.testing.assert_array_equal(persistence, 1.0)
    assert inst == 0.0
    with pytest.raises(DataError):
        transition_metrics(np.eye(3), None, 2)


def test_state_statistics_simple():
    X = np.array([[1.0, 0.0, 0.0], [3.0, 0.0, 0.0], [10.0, 1.0, 1.0]])
    stats = state_statistics(X, [0, 0, 1], labels=("a", "b", "c"))
    np.testing.assert_array_equal(stats.means[0], [2.0, 0.0, 0.0])
    np.testing.assert_array_equal(stats.stds[0], [1.0, 0.0, 0.0])
    assert stats.counts.tolist() == [2, 1, 0]
    assert np.all(np.isnan(stats.means[2]))
    assert stats.rows()[0] == ("a", 2, 2.0, 1.0, 0.0, 0.0, 0.0, 0.0)


def test_state_statistics_recover_table_means():
    spec = table_synthesis_spec(duration_frames=10_000, seed=5)
    signal, states = synthesize_arc_signal(spec)
    spectrogram = stft_power(signal, spec.frame_len, spec.frame_len, "rect")
    obs = build_observations(spectrogram)
    labels = frame_labels(states, spec.frame_len, spec.frame_len, spec.frame_len, len(obs))
    stats = state_statistics(obs, labels)
    np.testing.assert_allclose(stats.means, TABLE_MEANS, rtol=0.10)
    assert np.all(np.diff(stats.means[:, 0]) > 0)
    assert np.all(np.diff(stats.means[:, 1]) < 0)


def test_temporal_metrics_worked_example():
    tm = temporal_metrics([0, 0, 0, 1, 1, 2], 3)
    assert tm.transition_ratio == pytest.approx(0.4, abs=1e-15)
    assert tm.mean_state_duration == pytest.approx(2.0, abs=1e-15)
    assert tm.state_duration_variance == pytest.approx(2 / 3, abs=1e-15)
    # pairs (0,0) x2, (0,1), (1,1), (1,2)
    assert tm.transition_entropy == pytest.approx(-(0.4 * math.log(0.4) + 3 * 0.2 * math.log(0.2)), abs=1e-12)
    # state 2 has no outgoing pair and is left out of the persistence mean
    assert tm.average_state_persistence == pytest.approx((2 / 3 + 1 / 2) / 2, abs=1e-15)


def test_temporal_metrics_constant_and_alternating():
    tm = temporal_metrics([1] * 50, 3)
    assert (tm.transition_ratio, tm.transition_entropy, tm.average_state_persistence) == (0.0, 0.0, 1.0)
    assert tm.mean_state_duration == 50.0 and tm.state_duration_variance == 0.0
    tm = temporal_metrics([0, 1] * 25, 2)
    assert tm.transition_ratio == 1.0
    assert tm.average_state_persistence == 0.0
    assert tm.mean_state_duration == 1.0
    assert tm.transition_entropy == pytest.approx(math.log(2), abs=0.01)


def test_temporal_invariants_and_relabel_invariance(rng):
    path = sample_state_path(normalized_table_transition(), 2000, rng)
    tm = temporal_metrics(path, 3)
    runs = run_lengths(path)
    assert runs.sum() == path.size
    assert 0.0 <= tm.transition_ratio <= 1.0
    assert 0.0 <= tm.transition_entropy <= math.log(9) + 1e-12
    # number of runs = number of changes + 1
    assert tm.mean_state_duration == pytest.approx(path.size / (tm.transition_ratio * (path.size - 1) + 1))
    perm = np.array([2, 0, 1])
    other = temporal_metrics(perm[path], 3)
    for name in ("transition_ratio", "transition_entropy", "mean_state_duration", "state_duration_variance", "average_state_persistence"):
        assert getattr(other, name) == pytest.approx(getattr(tm, name), abs=1e-12), name


def test_temporal_errors():
    with pytest.raises(DataError):
        temporal_metrics([0], 2)
    with pytest.raises(DataError):
        temporal_metrics([0, 3], 3)


def test_best_permutation():
    mapping, acc = best_permutation([0, 0, 1, 2], [2, 2, 0, 1], 3)
    assert acc == 1.0
    assert mapping.tolist() == [1, 2, 0]
