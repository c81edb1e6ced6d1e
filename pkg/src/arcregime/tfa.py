"""Short-time Fourier power spectrogram and per-frame spectral descriptors.

Conventions
-----------
* Forward DFT is unnormalized (numpy ``rfft``); the one-sided spectrum keeps
  bins ``0 .. window_len // 2`` without doubling. For a windowed frame ``y``
  of length ``N`` this gives the Parseval identity::

      sum_k P[k] = (N * sum(y**2) + P[0] + P[N/2]) / 2      (N even)
      sum_k P[k] = (N * sum(y**2) + P[0]) / 2               (N odd)

* Entropy is in nats over the row-normalized power distribution.
* A frame with zero total power gets energy 0, entropy 0, centroid 0 Hz and
  is flagged as degenerate.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import DataError
from .signal_io import SampledSignal, segment

DEFAULT_WINDOW_LEN = 1024
DEFAULT_HOP = 256
WINDOW_KINDS = ("hann", "rect")
PROB_FLOOR = 1e-300


def window_function(kind, n):
    """Periodic Hann or rectangular analysis window."""
    if kind == "hann":
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)
    if kind in ("rect", "rectangular", "boxcar"):
        return np.ones(n)
    raise DataError(f"unknown window kind {kind!r}; expected one of {WINDOW_KINDS}")


def onesided_parseval_sum(windowed_frame, power_row):
    """Right-hand side of the Parseval identity above for one frame."""
    y = np.asarray(windowed_frame, dtype=float)
    n = y.size
    edges = power_row[0] + (power_row[-1] if n % 2 == 0 else 0.0)
    return (n * np.dot(y, y) + edges) / 2.0


@dataclass(frozen=True, eq=False)
class Spectrogram:
    power: np.ndarray
    frame_times: np.ndarray
    bin_freqs: np.ndarray
    window_len: int
    hop: int
    window_kind: str
    sample_rate: float

    @property
    def n_frames(self):
        return self.power.shape[0]

    @property
    def n_bins(self):
        return self.power.shape[1]


class FrameFeatures(NamedTuple):
    energy: float
    entropy: float
    centroid: float
    degenerate: bool = False


def stft_power(signal, window_len=DEFAULT_WINDOW_LEN, hop=DEFAULT_HOP, window_kind="hann"):
    """Power grid ``|S(t, f)|**2`` of the windowed frames.

    ``frame_times`` are window centres in seconds.
    """
    if not isinstance(signal, SampledSignal):
        raise DataError("stft_power expects a SampledSignal")
    frames = segment(signal, window_len, hop)
    w = window_function(window_kind, window_len)
    spectrum = np.fft.rfft(frames.frames * w, axis=1)
    power = spectrum.real ** 2 + spectrum.imag ** 2
    fs = signal.sample_rate
    times = (frames.frame_start_indices + window_len / 2.0) / fs
    freqs = np.arange(power.shape[1]) * fs / window_len
    for arr in (power, times, freqs):
        arr.setflags(write=False)
    return Spectrogram(power, times, freqs, frames.window_len, frames.hop, window_kind, fs)


def _features(power, freqs):
    """Energy, entropy and centroid for each row of ``power``."""
    power = np.atleast_2d(power)
    energy = power.sum(axis=1)
    degenerate = ~(energy > 0)
    safe = np.where(degenerate, 1.0, energy)
    p = power / safe[:, None]
    keep = p > PROB_FLOOR
    logs = np.log(np.where(keep, p, 1.0))
    entropy = -np.sum(np.where(keep, p * logs, 0.0), axis=1)
    entropy = np.clip(entropy, 0.0, np.log(power.shape[1]))
    centroid = power @ freqs / safe
    energy = np.where(degenerate, 0.0, energy)
    entropy = np.where(degenerate, 0.0, entropy)
    centroid = np.where(degenerate, 0.0, centroid)
    return energy, entropy, centroid, degenerate


def extract_frame_features(spectrogram, frame):
    if not 0 <= frame < spectrogram.n_frames:
        raise DataError(f"frame {frame} out of range [0, {spectrogram.n_frames})")
    e, h, c, bad = _features(spectrogram.power[frame], spectrogram.bin_freqs)
    return FrameFeatures(float(e[0]), float(h[0]), float(c[0]), bool(bad[0]))


def all_frame_features(spectrogram):
    """Vectorized :func:`extract_frame_features` over every frame."""
    return _features(spectrogram.power, spectrogram.bin_freqs)


def band_energy(spectrogram, frame, band):
    """Sum of power over bins with ``f_lo <= f <= f_hi``."""
    f_lo, f_hi = band
    if f_lo > f_hi:
        raise DataError(f"inverted band [{f_lo}, {f_hi}]")
    if not 0 <= frame < spectrogram.n_frames:
        raise DataError(f"frame {frame} out of range [0, {spectrogram.n_frames})")
    f = spectrogram.bin_freqs
    mask = (f >= f_lo) & (f <= f_hi)
    return float(spectrogram.power[frame, mask].sum())


def write_spectrogram(spectrogram, matrix_path, axes_path, fmt="%.10g"):
    """Write the power grid (rows = frames) and a long-format axis file.

    The axis file has columns ``axis,index,value`` with ``axis`` either
    ``time`` (seconds) or ``frequency`` (Hz).
    """
    header = ",".join(f"bin{k}" for k in range(spectrogram.n_bins))
    np.savetxt(matrix_path, spectrogram.power, fmt=fmt, delimiter=",", header=header, comments="")
    with Path(axes_path).open("w") as fh:
        fh.write("axis,index,value\n")
        for i, t in enumerate(spectrogram.frame_times):
            fh.write(f"time,{i},{t:.17g}\n")
        for i, f in enumerate(spectrogram.bin_freqs):
            fh.write(f"frequency,{i},{f:.17g}\n")
    return [Path(matrix_path), Path(axes_path)]
