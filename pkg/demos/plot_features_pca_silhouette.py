"""
Feature space: standardization, PCA and silhouette
==================================================

The three regimes form clusters in (energy, entropy, centroid) space. PCA
shows how much of the spread lies in two directions and the silhouette
score measures how cleanly the true labels cut it.
"""

import numpy as np

from arcregime import observation, presets, signal_io, tfa

spec = presets.table_synthesis_spec(duration_frames=1500, seed=2)
signal, states = signal_io.synthesize_arc_signal(spec)
spectrogram = tfa.stft_power(signal, spec.frame_len, spec.frame_len, "rect")
raw = observation.build_observations(spectrogram)
labels = signal_io.frame_labels(states, spec.frame_len, spec.frame_len, spec.frame_len, len(raw))

# z-scores put energy (thousands) and entropy (units) on the same footing
z, scaler = observation.standardize(raw)
print("feature means:", np.round(scaler.means, 2))
print("feature stds: ", np.round(scaler.stds, 2))

scores, ratios = observation.pca_project(z, 2)
print("explained variance ratio:", np.round(ratios, 3), "total", round(float(ratios.sum()), 3))
for k, name in enumerate(presets.STATE_LABELS):
    print(f"{name:>10} centre in PC space: {np.round(scores[labels == k].mean(axis=0), 2)}")

_, true_mean = observation.silhouette_scores(z, labels)
shuffled = np.random.default_rng(0).permutation(labels)
_, random_mean = observation.silhouette_scores(z, shuffled)
print(f"silhouette with true labels {true_mean:.3f}, with shuffled labels {random_mean:.3f}")
