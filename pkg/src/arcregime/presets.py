"""Reference regime parameters for the three-state welding arc model.

Values are per-state feature means and a transition matrix for the
Transient / Stable / Extinction regimes. The third transition row sums to
1.01 because of rounding; ``TABLE_TRANSITION`` keeps it verbatim
and ``normalized_table_transition`` applies the usual renormalization.
"""

import numpy as np

from .signal_io import SynthesisSpec

STATE_LABELS = ("Transient", "Stable", "Extinction")

# columns: energy, entropy (nats), centroid (Hz)
TABLE_MEANS = np.array([
    [664.68, 2.58, 2434.47],
    [1365.88, 2.01, 2500.75],
    [2752.16, 1.84, 2504.10],
])
TABLE_STDS = np.array([
    [955.60, 0.74, 83.76],
    [916.25, 0.15, 6.93],
    [745.06, 0.05, 6.39],
])

TABLE_TRANSITION = np.array([
    [0.95, 0.00, 0.05],
    [0.00, 0.90, 0.10],
    [0.04, 0.10, 0.87],
])


def normalized_table_transition():
    return TABLE_TRANSITION / TABLE_TRANSITION.sum(axis=1, keepdims=True)


def table_synthesis_spec(duration_frames=10_000, seed=0, **overrides):
    """Generator spec targeting the reference state means and transitions.

    Uses 10 kHz sampling and 1000-sample frames so the 50 Hz carrier sits on a
    DFT bin and the ~2.5 kHz centroids lie well below Nyquist.
    """
    kwargs = dict(
        state_means=TABLE_MEANS,
        transition=normalized_table_transition(),
        duration_frames=duration_frames,
        seed=seed,
        carrier_freq=50.0,
        noise_std=1e-3,
        sample_rate=10_000.0,
        frame_len=1000,
        carrier_share=0.3,
    )
    kwargs.update(overrides)
    return SynthesisSpec(**kwargs)
