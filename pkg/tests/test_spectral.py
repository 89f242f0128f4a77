import numpy as np
import pytest

from conftest import FS, sine, white_noise
from voicerisk.errors import ZeroSpectrumError
from voicerisk.features import extract_mfcc, extract_spectral_measures, frame_signal, mel_filterbank
from voicerisk.features.framing import Frames

NFFT = 512


def _one_frame(x):
    return Frames(np.asarray(x, dtype=np.float64)[None, :], FS, 160, "rect")


def test_flat_spectrum_frame():
    # A unit impulse has an exactly flat magnitude spectrum.
    imp = np.zeros(400)
    imp[0] = 1.0
    tracks = extract_spectral_measures(_one_frame(imp), np.array([True]))

    assert abs(tracks["slope_v0_500"].values[0]) < 1e-3

    # Oracle: for a flat spectrum the alpha ratio is the bin-count ratio.
    freqs = np.fft.rfftfreq(NFFT, 1 / FS)
    n_lo = int(np.sum((freqs >= 50) & (freqs <= 1000)))
    n_hi = int(np.sum((freqs > 1000) & (freqs <= 5000)))
    expected_alpha = 10 * np.log10(n_hi / n_lo)
    assert tracks["alpha_ratio_db"].values[0] == pytest.approx(expected_alpha, abs=1e-9)
    assert expected_alpha == pytest.approx(10 * np.log10(4000 / 950), abs=1.0)

    assert tracks["hammarberg_db"].values[0] == pytest.approx(0.0, abs=1e-9)


def test_500hz_tone_band_dominance():
    x = 0.3 * np.sin(2 * np.pi * 500 * np.arange(400) / FS) * np.hanning(400)
    tracks = extract_spectral_measures(_one_frame(x), np.array([True]))
    assert tracks["alpha_ratio_db"].values[0] < -30.0
    assert tracks["hammarberg_db"].values[0] > 30.0


def test_zero_frame_raises():
    with pytest.raises(ZeroSpectrumError):
        extract_spectral_measures(_one_frame(np.zeros(400)), np.array([True]))


def test_slope_voiced_gating():
    frames = frame_signal(sine(200))
    voiced = np.zeros(frames.n_frames, dtype=bool)
    voiced[:3] = True
    tracks = extract_spectral_measures(frames, voiced)
    slope = tracks["slope_v0_500"].values
    assert np.isfinite(slope[:3]).all()
    assert np.isnan(slope[3:]).all()
    # alpha / hammarberg cover every frame
    assert np.isfinite(tracks["alpha_ratio_db"].values).all()
    assert np.isfinite(tracks["hammarberg_db"].values).all()


def test_spectral_amplitude_invariance():
    frames = frame_signal(sine(300))
    voiced = np.ones(frames.n_frames, dtype=bool)
    a = extract_spectral_measures(frames, voiced)
    scaled = Frames(frames.data * 3.7, FS, frames.hop, frames.window)
    b = extract_spectral_measures(scaled, voiced)
    for key in ("slope_v0_500", "alpha_ratio_db", "hammarberg_db"):
        np.testing.assert_allclose(a[key].values, b[key].values, atol=1e-6)


def test_mel_filterbank_shape_and_coverage():
    fb = mel_filterbank(26, NFFT, FS)
    assert fb.shape == (26, NFFT // 2 + 1)
    assert (fb >= 0).all()
    freqs = np.fft.rfftfreq(NFFT, 1 / FS)
    inner = (freqs > 300) & (freqs < 7000)
    assert (fb.sum(axis=0)[inner] > 0).all()


def test_mfcc_deterministic():
    frames = frame_signal(sine(440))
    a = extract_mfcc(frames)
    b = extract_mfcc(frames)
    for ta, tb in zip(a, b):
        np.testing.assert_array_equal(ta.values, tb.values)
    assert [t.kind for t in a] == [f"mfcc_{k}" for k in range(1, 14)]


def test_mfcc_gain_invariance():
    frames = frame_signal(sine(440))
    doubled = Frames(frames.data * 2.0, FS, frames.hop, frames.window)
    a = extract_mfcc(frames)
    b = extract_mfcc(doubled)
    for ta, tb in zip(a, b):  # c0 is excluded, so the log-gain shift vanishes
        np.testing.assert_allclose(ta.values, tb.values, atol=1e-9)


def test_mfcc_tone_vs_noise_distinct():
    va = np.array([t.values.mean() for t in extract_mfcc(frame_signal(sine(440)))])
    vb = np.array([t.values.mean() for t in extract_mfcc(frame_signal(white_noise(seed=2)))])
    assert np.linalg.norm(va - vb) > 0.1
