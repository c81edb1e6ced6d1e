"""
Training a Gaussian HMM and decoding the regime path
====================================================

Mixture model seeds the emissions, Baum-Welch refines every parameter and
Viterbi returns the most probable regime sequence.
"""

import numpy as np

from arcregime import gmm, hmm, metrics, observation, presets, signal_io, tfa

spec = presets.table_synthesis_spec(duration_frames=3000, seed=3)
signal, states = signal_io.synthesize_arc_signal(spec)
spectrogram = tfa.stft_power(signal, spec.frame_len, spec.frame_len, "rect")
raw = observation.build_observations(spectrogram)
truth = signal_io.frame_labels(states, spec.frame_len, spec.frame_len, spec.frame_len, len(raw))
z, scaler = observation.standardize(raw)

mix, gmm_trace = gmm.fit_gmm(z, 3, seed=0)
print(f"GMM: {len(gmm_trace)} EM iterations, log-likelihood {gmm_trace[-1]:.1f}")

init = hmm.init_from_gmm(mix)
params, trace = hmm.baum_welch(z, init)
params = hmm.relabel(params, hmm.label_states(params))
print(f"Baum-Welch: {len(trace) - 1} re-estimations, "
      f"log-likelihood {trace[0]:.1f} -> {trace[-1]:.1f}")
print("non-decreasing:", bool(np.all(np.diff(trace) >= -1e-8)))

np.set_printoptions(precision=3, suppress=True)
print("estimated transition matrix:\n", params.transition)
print("generating transition matrix:\n", presets.normalized_table_transition())

path = hmm.viterbi(z, params)
_, accuracy = metrics.best_permutation(truth, path.states, 3)
print(f"Viterbi log joint {path.log_joint:.1f}, frame accuracy {accuracy:.4f}")

# emission means back in physical units
for name, mean in zip(params.state_labels, scaler.inverse(params.means)):
    print(f"{name:>10}: E={mean[0]:8.1f}  H={mean[1]:.3f}  C={mean[2]:7.1f} Hz")
