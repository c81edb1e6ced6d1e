import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from arcregime.errors import DataError
from arcregime.signal_io import SampledSignal
from arcregime.tfa import (
    Spectrogram,
    all_frame_features,
    band_energy,
    extract_frame_features,
    onesided_parseval_sum,
    stft_power,
    window_function,
    write_spectrogram,
)


def direct_dft_power(y):
    """Explicit O(N^2) one-sided DFT power."""
    n = y.size
    k = np.arange(n // 2 + 1)[:, None]
    m = np.arange(n)[None, :]
    ang = 2 * np.pi * k * m / n
    re = (y * np.cos(ang)).sum(axis=1)
    im = -(y * np.sin(ang)).sum(axis=1)
    return re ** 2 + im ** 2


def _grid(power, fs=1000.0, window_len=None):
    power = np.atleast_2d(np.asarray(power, dtype=float))
    F = power.shape[1]
    n = window_len or 2 * (F - 1)
    return Spectrogram(power, np.zeros(power.shape[0]), np.arange(F) * fs / n, n, n, "rect", fs)


def test_sinusoid_on_bin_concentrates():
    fs, n = 1000.0, 100
    x = np.sin(2 * np.pi * 50 * np.arange(n) / fs)
    spec = stft_power(SampledSignal(x, fs), n, n, "rect")
    row = spec.power[0]
    peak = int(np.argmax(row))
    assert spec.bin_freqs[peak] == 50.0
    others = np.delete(row, peak)
    assert others.max() < 1e-10 * row[peak]
    np.testing.assert_allclose(row[peak], (n / 2) ** 2, rtol=1e-12)


def test_hann_leaks_only_into_neighbours():
    fs, n = 1000.0, 100
    x = np.sin(2 * np.pi * 50 * np.arange(n) / fs)
    row = stft_power(SampledSignal(x, fs), n, n, "hann").power[0]
    k = 5
    assert np.delete(row, [k - 1, k, k + 1]).max() < 1e-10 * row[k]
    np.testing.assert_allclose(row[k - 1] / row[k], 0.25, rtol=1e-9)


def test_zero_signal_is_degenerate():
    spec = stft_power(SampledSignal(np.zeros(64), 100.0), 16, 8)
    assert np.all(spec.power == 0)
    e, h, c, bad = all_frame_features(spec)
    assert np.all(e == 0) and np.all(h == 0) and np.all(c == 0) and np.all(bad)
    assert extract_frame_features(spec, 0) == (0.0, 0.0, 0.0, True)


@pytest.mark.parametrize("n", [64, 63])
@pytest.mark.parametrize("kind", ["hann", "rect"])
def test_parseval_against_direct_dft(n, kind, rng):
    x = rng.normal(size=n)
    spec = stft_power(SampledSignal(x, 1.0), n, n, kind)
    y = x * window_function(kind, n)
    oracle = direct_dft_power(y)
    np.testing.assert_allclose(spec.power[0], oracle, rtol=1e-9, atol=1e-9 * oracle.max())
    # edges from the oracle, not from the code under test
    edges = oracle[0] + (oracle[-1] if n % 2 == 0 else 0.0)
    expected = (n * np.dot(y, y) + edges) / 2
    total = spec.power[0].sum()
    assert abs(total - expected) <= 1e-9 * expected
    assert abs(onesided_parseval_sum(y, spec.power[0]) - total) <= 1e-9 * total


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.integers(2, 40), elements=st.floats(0, 1e6)))
def test_entropy_bounds(row):
    spec = _grid(row)
    e, h, c, bad = all_frame_features(spec)
    F = row.size
    assert 0.0 <= h[0] <= np.log(F) + 1e-12
    if not bad[0]:
        assert spec.bin_freqs[0] - 1e-9 <= c[0] <= spec.bin_freqs[-1] + 1e-9
        np.testing.assert_allclose(e[0], row.sum(), rtol=1e-12)


def test_flat_spectrum_max_entropy():
    spec = _grid(np.full(33, 2.0))
    f = extract_frame_features(spec, 0)
    np.testing.assert_allclose(f.entropy, np.log(33), rtol=1e-12)
    np.testing.assert_allclose(f.centroid, spec.bin_freqs.mean(), rtol=1e-12)


def test_single_bin_zero_entropy():
    row = np.zeros(51)
    row[5] = 3.0
    spec = _grid(row, fs=1000.0, window_len=100)
    f = extract_frame_features(spec, 0)
    assert f.entropy == 0.0
    assert f.centroid == 50.0
    assert f.energy == 3.0


def test_two_equal_bins():
    # bins at 40 and 60 Hz with equal power
    row = np.zeros(51)
    row[4] = row[6] = 1.0
    f = extract_frame_features(_grid(row, fs=1000.0, window_len=100), 0)
    np.testing.assert_allclose(f.centroid, 50.0, rtol=1e-12)
    np.testing.assert_allclose(f.entropy, np.log(2), rtol=1e-12)


def test_band_energy_cases(rng):
    spec = _grid(rng.uniform(size=(3, 51)), fs=1000.0, window_len=100)
    full = band_energy(spec, 1, (0.0, 500.0))
    np.testing.assert_allclose(full, extract_frame_features(spec, 1).energy, rtol=1e-12)
    assert band_energy(spec, 1, (41.0, 49.0)) == 0.0
    np.testing.assert_allclose(band_energy(spec, 1, (0.0, 250.0)), spec.power[1, :26].sum(), rtol=1e-12)
    # additivity across a split that falls between bins, monotonicity in width
    lo, hi = band_energy(spec, 1, (0.0, 245.0)), band_energy(spec, 1, (246.0, 500.0))
    np.testing.assert_allclose(lo + hi, full, rtol=1e-12)
    assert band_energy(spec, 1, (100.0, 200.0)) <= band_energy(spec, 1, (90.0, 210.0))
    with pytest.raises(DataError):
        band_energy(spec, 1, (60.0, 40.0))
    with pytest.raises(DataError):
        band_energy(spec, 3, (0.0, 1.0))


def test_scale_invariance(rng):
    x = rng.normal(size=256)
    a = stft_power(SampledSignal(x, 500.0), 64, 32)
    b = stft_power(SampledSignal(3.0 * x, 500.0), 64, 32)
    ea, ha, ca, _ = all_frame_features(a)
    eb, hb, cb, _ = all_frame_features(b)
    np.testing.assert_allclose(eb, 9.0 * ea, rtol=1e-12)
    np.testing.assert_allclose(hb, ha, atol=1e-12)
    np.testing.assert_allclose(cb, ca, rtol=1e-12)


def test_sample_rate_scales_centroid_only(rng):
    x = rng.normal(size=256)
    a = all_frame_features(stft_power(SampledSignal(x, 500.0), 64, 32))
    b = all_frame_features(stft_power(SampledSignal(x, 2000.0), 64, 32))
    np.testing.assert_allclose(b[0], a[0], rtol=1e-12)
    np.testing.assert_allclose(b[2], 4.0 * a[2], rtol=1e-12)


def test_hop_shift(rng):
    x = rng.normal(size=300)
    full = stft_power(SampledSignal(x, 100.0), 32, 4)
    shifted = stft_power(SampledSignal(x[8:], 100.0), 32, 4)
    np.testing.assert_allclose(shifted.power, full.power[2 : 2 + shifted.n_frames], rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(full.frame_times[:2], [16 / 100, 20 / 100])


def test_write_spectrogram(tmp_path, rng):
    spec = stft_power(SampledSignal(rng.normal(size=100), 50.0), 20, 10)
    m, a = write_spectrogram(spec, tmp_path / "s.csv", tmp_path / "ax.csv")
    back = np.loadtxt(m, delimiter=",", skiprows=1)
    assert back.shape == spec.power.shape
    np.testing.assert_allclose(back, spec.power, rtol=1e-9)
    lines = a.read_text().splitlines()
    assert lines[0] == "axis,index,value"
    assert len(lines) == 1 + spec.n_frames + spec.n_bins


def test_bad_window_kind():
    with pytest.raises(DataError):
        stft_power(SampledSignal(np.ones(8), 1.0), 4, 2, "kaiser")
