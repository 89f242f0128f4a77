import numpy as np
import pytest

from conftest import FS, harmonic_voice, sine, white_noise
from voicerisk.audio import AudioBuffer
from voicerisk.errors import NoVoicedRunError, TooShortError
from voicerisk.features import extract_f0, extract_perturbation, frame_signal, hnr_track


def pitch_of(buf):
    return extract_f0(frame_signal(buf, window="rect"))


def test_pure_sine_220():
    pt = pitch_of(sine(220))
    assert pt.voiced.all()
    rel = np.abs(pt.f0.values - 220.0) / 220.0
    assert np.nanmax(rel) < 0.02


def test_white_noise_mostly_unvoiced():
    pt = pitch_of(white_noise(seed=7))
    assert np.mean(~pt.voiced) >= 0.90


def test_pulse_train_110_no_octave_error():
    pt = pitch_of(harmonic_voice(110, noise=0.001, seed=3))
    assert pt.voiced.mean() > 0.9
    rel = np.abs(pt.f0.values[pt.voiced] - 110.0) / 110.0
    assert np.max(rel) < 0.02


def test_silence_unvoiced():
    buf = AudioBuffer(np.zeros(8000) + 1e-9, FS, "sil")
    pt = pitch_of(buf)
    assert not pt.voiced.any()


def test_frame_counts():
    buf = sine(220, dur_s=1.0)
    frames = frame_signal(buf)
    assert frames.n_frames == 98  # (16000 - 400) // 160 + 1
    one = AudioBuffer(np.ones(400) * 0.1, FS, "one")
    assert frame_signal(one).n_frames == 1
    with pytest.raises(TooShortError):
        frame_signal(AudioBuffer(np.ones(160) * 0.1, FS, "short"))


def test_f0_range_clamped():
    pt = pitch_of(sine(220))
    vals = pt.f0.values[pt.voiced]
    assert np.all((vals >= 50.0) & (vals <= 600.0))


def _alternating_pulse_cycles(base_f0=150.0, depth=0.02, dur_s=1.5):
    """One damped pulse per cycle; cycle lengths alternate +-depth."""
    T = 1.0 / base_f0
    periods = []
    total, sign = 0.0, 1
    while total < dur_s:
        p = T * (1.0 + depth * sign)
        periods.append(p)
        total += p
        sign = -sign
    pieces = []
    for p in periods:
        n = int(round(p * FS))
        tt = np.arange(n) / FS
        pieces.append(np.sin(2 * np.pi * base_f0 * tt) * np.exp(-tt * 100.0))
    return AudioBuffer(0.3 * np.concatenate(pieces), FS, "altmod"), np.asarray(periods)


def test_perturbation_pure_sine():
    buf = sine(200)
    stats = extract_perturbation(buf, pitch_of(buf))
    assert stats.jitter_local < 0.002
    assert stats.shimmer_local < 0.005
    assert stats.mean_hnr_db == pytest.approx(40.0, abs=1e-6)  # clamp ceiling


def test_perturbation_alternating_periods():
    buf, periods = _alternating_pulse_cycles()
    stats = extract_perturbation(buf, pitch_of(buf))
    expected = np.mean(np.abs(np.diff(periods))) / np.mean(periods)
    assert expected == pytest.approx(0.04, abs=1e-3)
    assert stats.jitter_local == pytest.approx(expected, abs=0.01)


def test_perturbation_all_unvoiced():
    buf = white_noise(seed=5)
    with pytest.raises(NoVoicedRunError):
        extract_perturbation(buf, pitch_of(buf))


def test_hnr_track_clamped():
    pt = pitch_of(sine(150))
    hnr = hnr_track(pt)
    finite = hnr.finite()
    assert finite.size > 0
    assert np.all((finite >= -20.0) & (finite <= 40.0))


def test_f0_amplitude_invariance():
    a = harmonic_voice(140, amp=0.05, noise=0.0)
    b = AudioBuffer(a.samples * 8.0, FS, "scaled")
    fa = pitch_of(a).f0.values
    fb = pitch_of(b).f0.values
    np.testing.assert_allclose(fa, fb, rtol=1e-6, equal_nan=True)
