"""Waveform ingestion, Nyquist check, framing and the synthetic arc generator."""

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.special import digamma

from .errors import DataError

DEFAULT_SAMPLE_RATE = 5000.0
DEFAULT_NYQUIST_MARGIN = 10.0

_SPLIT = re.compile(r"[,\s]+")


def _frozen_array(values, dtype=float):
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SampledSignal:
    """Uniformly sampled current waveform (amperes) at ``sample_rate`` Hz."""

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        samples = _frozen_array(self.samples).reshape(-1)
        if samples.size == 0:
            raise DataError("signal has no samples")
        if not np.all(np.isfinite(samples)):
            raise DataError("signal contains non-finite samples")
        if not self.sample_rate > 0:
            raise DataError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", float(self.sample_rate))

    def __len__(self):
        return self.samples.size

    @property
    def duration(self):
        return self.samples.size / self.sample_rate


@dataclass(frozen=True, eq=False)
class FrameSet:
    frames: np.ndarray
    window_len: int
    hop: int
    frame_start_indices: np.ndarray

    def __len__(self):
        return self.frames.shape[0]


class SamplingVerdict(NamedTuple):
    passed: bool
    message: str


def _parse_row(line, lineno, column):
    cells = [c for c in _SPLIT.split(line.strip()) if c]
    if column >= len(cells):
        raise DataError(f"row {lineno}: column {column} does not exist ({len(cells)} columns)")
    try:
        return float(cells[column])
    except ValueError:
        raise DataError(f"row {lineno}: non-numeric value {cells[column]!r}") from None


def load_signal(path, column=0, sample_rate=DEFAULT_SAMPLE_RATE):
    """Read one column of a comma/whitespace delimited numeric text file.

    Blank lines and lines starting with ``#`` are skipped. Row numbers in
    error messages are 1-based physical line numbers.
    """
    if not sample_rate > 0:
        raise DataError(f"sample_rate must be positive, got {sample_rate}")
    path = Path(path)
    if not path.is_file():
        raise DataError(f"input file not found: {path}")
    values = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            values.append(_parse_row(stripped, lineno, column))
    if not values:
        raise DataError(f"no samples in {path}")
    return SampledSignal(np.array(values), sample_rate)


def write_signal(path, signal):
    path = Path(path)
    with path.open("w") as fh:
        fh.write(f"# sample_rate = {signal.sample_rate!r}\n")
        fh.writelines(f"{x:.17g}\n" for x in signal.samples)
    return path


def write_labels(path, states):
    path = Path(path)
    with path.open("w") as fh:
        fh.writelines(f"{int(s)}\n" for s in states)
    return path


def load_labels(path):
    sig = load_signal(path, column=0, sample_rate=1.0)
    labels = sig.samples.astype(int)
    if np.any(labels != sig.samples) or np.any(labels < 0):
        raise DataError(f"{path}: state labels must be non-negative integers")
    return labels


def validate_sampling(signal, f_max, margin=DEFAULT_NYQUIST_MARGIN):
    """Check ``sample_rate >= margin * 2 * f_max``.

    ``margin`` turns the "much greater than Nyquist" requirement into a number;
    ``margin=1`` is the bare Nyquist criterion.
    """
    if not f_max > 0:
        raise DataError(f"f_max must be positive, got {f_max}")
    if margin < 1:
        raise DataError(f"margin must be >= 1, got {margin}")
    required = margin * 2.0 * f_max
    fs = signal.sample_rate
    if fs >= required:
        return SamplingVerdict(True, f"sample rate {fs:g} Hz >= {required:g} Hz ({margin:g} x 2 x {f_max:g} Hz)")
    return SamplingVerdict(False, f"sample rate {fs:g} Hz < {required:g} Hz ({margin:g} x 2 x {f_max:g} Hz)")


def frame_count(n_samples, window_len, hop):
    return (n_samples - window_len) // hop + 1


def segment(signal, window_len, hop):
    """Cut the signal into complete windows starting at 0, hop, 2*hop, ...

    A trailing partial window is dropped.
    """
    x = signal.samples if isinstance(signal, SampledSignal) else np.asarray(signal, dtype=float)
    n = x.size
    if hop < 1:
        raise DataError(f"hop must be >= 1, got {hop}")
    if window_len < 1 or window_len > n:
        raise DataError(f"window_len {window_len} must be in [1, {n}] (number of samples)")
    if hop > window_len:
        raise DataError(f"hop {hop} exceeds window_len {window_len}")
    starts = np.arange(frame_count(n, window_len, hop)) * hop
    frames = np.lib.stride_tricks.sliding_window_view(x, window_len)[::hop]
    return FrameSet(_frozen_array(frames), int(window_len), int(hop), _frozen_array(starts, int))


def check_stochastic(matrix, atol=1e-9, name="transition"):
    A = np.asarray(matrix, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DataError(f"{name} matrix must be square, got shape {A.shape}")
    if np.any(A < 0) or not np.all(np.isfinite(A)):
        raise DataError(f"{name} matrix has negative or non-finite entries")
    sums = A.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > atol)
    if bad.size:
        raise DataError(f"{name} row {bad[0]} sums to {sums[bad[0]]!r}, not 1")
    return A


@dataclass(frozen=True, eq=False)
class SynthesisSpec:
    """Parameters of the synthetic regime-switching current generator.

    ``state_means`` holds one (energy, entropy, centroid) target per state.
    Each synthetic frame is ``frame_len`` samples long and carries one state.
    ``carrier_share`` is the fraction of a frame's expected spectral energy
    placed on the carrier; the rest goes to a state-specific noise band.
    """

    state_means: np.ndarray
    transition: np.ndarray
    duration_frames: int
    seed: int = 0
    carrier_freq: float = 50.0
    noise_std: float = 1e-3
    sample_rate: float = DEFAULT_SAMPLE_RATE
    frame_len: int = 1024
    carrier_share: float = 0.3

    def __post_init__(self):
        A = check_stochastic(self.transition)
        means = np.array(self.state_means, dtype=float).reshape(-1, 3)
        if means.shape[0] != A.shape[0]:
            raise DataError(f"{means.shape[0]} state means for a {A.shape[0]}-state transition matrix")
        if self.duration_frames < 1:
            raise DataError("duration_frames must be >= 1")
        if not 0.0 <= self.carrier_share < 1.0:
            raise DataError("carrier_share must be in [0, 1)")
        if self.frame_len < 8:
            raise DataError("frame_len must be >= 8")
        if not 0 < self.carrier_freq < self.sample_rate / 2:
            raise DataError("carrier_freq must lie strictly inside (0, sample_rate / 2)")
        if self.noise_std < 0:
            raise DataError("noise_std must be >= 0")
        if np.any(means[:, 0] < 0) or np.any(means[:, 1] < 0):
            raise DataError("energy and entropy targets must be non-negative")
        object.__setattr__(self, "transition", _frozen_array(A))
        object.__setattr__(self, "state_means", _frozen_array(means))

    @property
    def n_states(self):
        return self.transition.shape[0]


def sample_state_path(transition, n_steps, rng, initial_state=0):
    A = np.asarray(transition, dtype=float)
    cum = np.cumsum(A, axis=1)
    u = rng.random(n_steps)
    path = np.empty(n_steps, dtype=int)
    state = initial_state
    last = A.shape[0] - 1
    path[0] = state
    for t in range(1, n_steps):
        state = min(int(np.searchsorted(cum[state], u[t], side="right")), last)
        path[t] = state
    return path


def _expected_entropy(carrier_share, width):
    # carrier as a fixed share, band bins as flat Dirichlet: E[H] = psi(B+1) - psi(2)
    rho = carrier_share
    h = 0.0 if rho == 0.0 else -rho * np.log(rho) - (1 - rho) * np.log(1 - rho)
    return h + (1 - rho) * (digamma(width + 1) - digamma(2))


class _StateBand(NamedTuple):
    carrier_amp: float
    band: slice
    bin_var: float


def _design_state(target, spec, n_bins):
    energy, entropy, centroid = target
    rho = spec.carrier_share
    df = spec.sample_rate / spec.frame_len
    usable = n_bins - 2  # keep off DC and the Nyquist bin
    widths = np.arange(1, usable + 1)
    width = int(widths[np.argmin(np.abs(_expected_entropy(rho, widths) - entropy))])
    band_center = (centroid - rho * spec.carrier_freq) / (1 - rho)
    start = int(round(band_center / df - (width - 1) / 2))
    start = min(max(start, 1), n_bins - 1 - width)
    n = spec.frame_len
    carrier_amp = 2.0 * np.sqrt(rho * energy) / n
    return _StateBand(carrier_amp, slice(start, start + width), (1 - rho) * energy / width)


def synthesize_arc_signal(spec):
    """Draw a regime path and render a current waveform that follows it.

    Per frame the waveform is a phase-continuous carrier sinusoid whose
    amplitude sets the carrier's share of the energy target, plus a random
    complex-Gaussian noise band whose width is chosen for the entropy target
    and whose position is chosen for the centroid target, plus white
    measurement noise of standard deviation ``noise_std``. Targets assume an
    unnormalized one-sided DFT of each frame with a rectangular window and
    are met in expectation only approximately.

    Returns the signal and the per-frame true state indices (path starts in
    state 0). Output is a deterministic function of ``spec.seed``.
    """
    rng = np.random.default_rng(spec.seed)
    n_frames = spec.duration_frames
    n = spec.frame_len
    n_bins = n // 2 + 1
    path = sample_state_path(spec.transition, n_frames, rng)
    designs = [_design_state(m, spec, n_bins) for m in spec.state_means]

    coeffs = np.zeros((n_frames, n_bins), dtype=complex)
    for k, design in enumerate(designs):
        rows = np.flatnonzero(path == k)
        if rows.size == 0:
            continue
        width = design.band.stop - design.band.start
        scale = np.sqrt(design.bin_var / 2.0)
        draws = rng.standard_normal((rows.size, width, 2)) * scale
        coeffs[rows, design.band] = draws[..., 0] + 1j * draws[..., 1]
    band_noise = np.fft.irfft(coeffs, n=n, axis=1).reshape(-1)

    t = np.arange(n_frames * n) / spec.sample_rate
    amps = np.array([d.carrier_amp for d in designs])[path]
    carrier = np.repeat(amps, n) * np.sin(2.0 * np.pi * spec.carrier_freq * t)
    white = spec.noise_std * rng.standard_normal(n_frames * n)
    samples = carrier + band_noise + white
    return SampledSignal(samples, spec.sample_rate), path


def frame_labels(true_states, frame_len, window_len, hop, n_frames):
    """Map per-synthetic-frame states onto analysis frames by window centre."""
    centres = np.arange(n_frames) * hop + window_len // 2
    idx = np.minimum(centres // frame_len, len(true_states) - 1)
    return np.asarray(true_states)[idx]
