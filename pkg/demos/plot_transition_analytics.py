"""
Persistence, long-run occupancy and the instability alarm
=========================================================

Everything here works from a transition matrix alone.
"""

import numpy as np

from arcregime import hmm, metrics, presets
from arcregime.signal_io import sample_state_path

A = presets.normalized_table_transition()
persistence, p_se = metrics.transition_metrics(A)
print("persistence A_kk:", np.round(persistence, 4))
print("Stable -> Extinction in one step:", p_se)

pi = hmm.stationary_distribution(A)
print("stationary distribution:", np.round(pi, 6), "(exact: 80/281, 100/281, 101/281)")

# the Delta-step forecast converges to the stationary rows
for delta in (1, 5, 20, 100):
    P = hmm.n_step_prediction(A, delta)
    print(f"Delta={delta:3d}  P(Extinction | Stable) = {P[1, 2]:.4f}  max |row - pi*| = {np.abs(P - pi).max():.2e}")

# alarm fires when the forecast strictly exceeds theta
for theta in (0.1, 0.3, 0.5):
    res = hmm.instability_alarm(A, current_state=1, delta=10, theta=theta)
    print(f"theta={theta}: p={res.probability:.4f} fired={res.fired}")

# temporal metrics of a sampled regime path
path = sample_state_path(A, 5000, np.random.default_rng(4))
tm = metrics.temporal_metrics(path, 3)
for field, value in tm.__dict__.items():
    print(f"{field:>28}: {value:.4f}")
