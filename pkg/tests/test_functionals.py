import numpy as np
import pytest

from conftest import FS, harmonic_voice, resonant_voice
from voicerisk.audio import AudioBuffer
from voicerisk.errors import EmptyTrackSetError
from voicerisk.features import (
    GEMLITE_FEATURE_NAMES,
    GemliteExtractor,
    apply_functionals,
)
from voicerisk.features.framing import FrameTrack
from voicerisk.features.gemlite import FUNCTIONAL_TRACKS
from voicerisk.features.perturbation import PerturbationStats


def _percentile_oracle(values, q):
    """Closest-rank linear interpolation, written independently."""
    x = np.sort(np.asarray(values, dtype=float))
    if x.size == 1:
        return x[0]
    pos = q / 100.0 * (x.size - 1)
    lo = int(np.floor(pos))
    hi = int(np.ceil(pos))
    frac = pos - lo
    return x[lo] * (1 - frac) + x[hi] * frac


def _tracks_from(values_by_kind, frame_rate=100.0):
    tracks = {}
    for _, kind in FUNCTIONAL_TRACKS:
        vals = values_by_kind.get(kind, np.zeros(10))
        tracks[kind] = FrameTrack(kind, frame_rate, vals)
    return tracks


def test_constant_track_functionals():
    tracks = _tracks_from({"f0_hz": np.full(20, 5.0)})
    fv = apply_functionals(tracks, PerturbationStats(0.0, 0.0, 0.0))
    names = list(fv.names)
    for func, expect in (("mean", 5.0), ("std", 0.0), ("20th", 5.0),
                         ("50th", 5.0), ("80th", 5.0)):
        assert fv.values[names.index(f"F0_{func}")] == expect


def test_percentile_linear_interpolation():
    vals = np.arange(1.0, 101.0)
    tracks = _tracks_from({"loudness_rms": vals})
    fv = apply_functionals(tracks, None)
    names = list(fv.names)
    assert _percentile_oracle(vals, 80) == pytest.approx(80.2)
    assert fv.values[names.index("Loudness_80th")] == pytest.approx(80.2)
    assert fv.values[names.index("Loudness_20th")] == pytest.approx(
        _percentile_oracle(vals, 20))


def test_f0_80th_is_voiced_percentile():
    f0 = np.full(50, np.nan)
    voiced_values = np.linspace(100, 200, 30)
    f0[:30] = voiced_values
    tracks = _tracks_from({"f0_hz": f0})
    fv = apply_functionals(tracks, None)
    names = list(fv.names)
    assert fv.values[names.index("F0_80th")] == pytest.approx(
        _percentile_oracle(voiced_values, 80))


def test_nan_only_track_yields_zero_with_zero_coverage():
    tracks = _tracks_from({"f0_hz": np.full(10, np.nan)})
    fv = apply_functionals(tracks, None)
    names = list(fv.names)
    for func in ("mean", "std", "20th", "50th", "80th"):
        assert fv.values[names.index(f"F0_{func}")] == 0.0
    assert fv.values[names.index("VoicedFraction")] == 0.0


def test_vector_length_and_order_fixed():
    assert len(GEMLITE_FEATURE_NAMES) == 111
    fv1 = apply_functionals(_tracks_from({}), None)
    fv2 = apply_functionals(_tracks_from({"f0_hz": np.arange(10.0) + 100}), None)
    assert fv1.names == fv2.names == GEMLITE_FEATURE_NAMES
    for name in ("SlopeV0-500Hz_mean", "AlphaRatio_mean", "HammarbergIndex_mean",
                 "F0_80th", "F1Bandwidth_mean"):
        assert name in GEMLITE_FEATURE_NAMES


def test_temporal_features():
    f0 = np.full(100, np.nan)
    f0[10:40] = 150.0   # run of 30 frames
    f0[60:75] = 160.0   # run of 15 frames
    tracks = _tracks_from({"f0_hz": f0})
    fv = apply_functionals(tracks, None)
    names = list(fv.names)
    assert fv.values[names.index("VoicedFraction")] == pytest.approx(0.45)
    assert fv.values[names.index("VoicedSegmentsPerSec")] == pytest.approx(2.0)
    assert fv.values[names.index("MeanVoicedRunMs")] == pytest.approx(225.0)


def test_empty_tracks_raise():
    with pytest.raises(EmptyTrackSetError):
        apply_functionals({}, None)


def test_percentiles_monotone_in_q_and_affine_equivariant():
    rng = np.random.default_rng(3)
    vals = rng.standard_normal(57)
    p20 = _percentile_oracle(vals, 20)
    p50 = _percentile_oracle(vals, 50)
    p80 = _percentile_oracle(vals, 80)
    assert p20 <= p50 <= p80
    for a, b in ((2.0, 1.0), (0.5, -3.0)):
        assert _percentile_oracle(a * vals + b, 80) == pytest.approx(a * p80 + b)
        assert np.percentile(a * vals + b, 80) == pytest.approx(a * p80 + b)


def test_percentiles_bracketed_under_monotone_transform():
    # linear-rank interpolation stays between the order statistics that
    # bound the rank position, for any order-preserving transform
    rng = np.random.default_rng(12)
    vals = rng.standard_normal(41)
    for transform in (np.exp, np.tanh, lambda v: v ** 3):
        tv = np.sort(transform(vals))
        for q in (20.0, 50.0, 80.0):
            pos = q / 100.0 * (tv.size - 1)
            lo, hi = tv[int(np.floor(pos))], tv[int(np.ceil(pos))]
            p = np.percentile(transform(vals), q)
            assert lo - 1e-12 <= p <= hi + 1e-12
        # and q-monotonicity survives the transform
        ps = [np.percentile(transform(vals), q) for q in (20, 50, 80)]
        assert ps[0] <= ps[1] <= ps[2]


def test_extractor_full_vector_on_voice():
    buf = resonant_voice(120.0, [(620.0, 110.0), (1700.0, 130.0)], noise_db=-25)
    fv = GemliteExtractor().extract(buf)
    assert fv.names == GEMLITE_FEATURE_NAMES
    assert np.all(np.isfinite(fv.values))
    names = list(fv.names)
    assert fv.values[names.index("VoicedFraction")] > 0.9
    assert 100 < fv.values[names.index("F0_50th")] < 140


def test_extractor_amplitude_invariance():
    buf = resonant_voice(110.0, [(600.0, 100.0)], noise_db=-30)
    ex = GemliteExtractor()
    fv1 = ex.extract(buf)
    fv2 = ex.extract(AudioBuffer(buf.samples * 0.4, FS, "scaled"))
    names = list(fv1.names)
    invariant_prefixes = ("F0_", "SlopeV0-500Hz", "AlphaRatio", "HammarbergIndex",
                          "F1_", "F1Bandwidth", "F2_", "F3_", "Jitter", "Shimmer")
    idx = [i for i, n in enumerate(names) if n.startswith(invariant_prefixes)]
    rel = np.abs(fv1.values[idx] - fv2.values[idx]) / np.maximum(
        np.abs(fv1.values[idx]), 1e-9)
    assert rel.max() < 1e-6


def test_extractor_hop_shift_changes_only_boundary():
    buf = harmonic_voice(130, dur_s=1.0, noise=0.0005, seed=9)
    ex = GemliteExtractor()
    tracks1, _ = ex.tracks(buf)
    shifted = AudioBuffer(buf.samples[160:], FS, "shift")
    tracks2, _ = ex.tracks(shifted)
    a = tracks1["alpha_ratio_db"].values
    b = tracks2["alpha_ratio_db"].values
    # frame k of the shifted signal is frame k+1 of the original
    np.testing.assert_allclose(a[1:1 + b.size], b, atol=1e-9)
