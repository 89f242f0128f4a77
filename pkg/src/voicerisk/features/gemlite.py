"""The GeMLite feature set: 111 interpretable functionals per segment.

Layout (fixed order, identical for every segment):
  * 21 frame tracks x 5 functionals (mean, std, 20th/50th/80th percentile
    with linear interpolation between closest ranks) = 105 features.
    Tracks: F0, Loudness, SlopeV0-500Hz, AlphaRatio, HammarbergIndex,
    F1, F1Bandwidth, F2, F3, MFCC1..MFCC12.
  * jitter, shimmer and mean HNR over voiced cycles = 3 features.
  * voiced fraction, voiced segments per second and mean voiced run
    length (ms) = 3 features.

Functionals skip NaN frames; a track with no defined frames contributes
zeros (its missing coverage is visible through VoicedFraction, since only
voicing-gated tracks can be empty).
"""

import logging
from dataclasses import dataclass

import numpy as np

from ..audio import AudioBuffer
from ..errors import EmptyTrackSetError, NoVoicedRunError
from .framing import frame_signal, extract_loudness
from .formants import extract_formants
from .perturbation import PerturbationStats, extract_perturbation
from .pitch import extract_f0
from .spectral import extract_mfcc, extract_spectral_measures

log = logging.getLogger(__name__)

GEMLITE_SET_ID = "gemlite"
N_GEMLITE_MFCC = 12

FUNCTIONAL_TRACKS = (
    ("F0", "f0_hz"),
    ("Loudness", "loudness_rms"),
    ("SlopeV0-500Hz", "slope_v0_500"),
    ("AlphaRatio", "alpha_ratio_db"),
    ("HammarbergIndex", "hammarberg_db"),
    ("F1", "f1_hz"),
    ("F1Bandwidth", "f1_bw_hz"),
    ("F2", "f2_hz"),
    ("F3", "f3_hz"),
) + tuple((f"MFCC{k}", f"mfcc_{k}") for k in range(1, N_GEMLITE_MFCC + 1))

FUNCTIONALS = ("mean", "std", "20th", "50th", "80th")
PERCENTILES = {"20th": 20.0, "50th": 50.0, "80th": 80.0}

EXTRA_FEATURES = (
    "Jitter_local", "Shimmer_local", "HNR_mean",
    "VoicedFraction", "VoicedSegmentsPerSec", "MeanVoicedRunMs",
)

GEMLITE_FEATURE_NAMES = tuple(
    f"{label}_{func}" for label, _ in FUNCTIONAL_TRACKS for func in FUNCTIONALS
) + EXTRA_FEATURES

assert len(GEMLITE_FEATURE_NAMES) == 111


@dataclass(frozen=True)
class FeatureVector:
    """Named, ordered, finite feature values for one segment."""

    set_id: str
    names: tuple
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", tuple(self.names))
        if len(self.names) != values.size:
            raise EmptyTrackSetError(
                f"{len(self.names)} names but {values.size} values"
            )
        if not np.all(np.isfinite(values)):
            raise EmptyTrackSetError("feature vector contains non-finite values")


def _track_functionals(values: np.ndarray) -> list:
    finite = values[np.isfinite(values)]
    if finite.size == 0:
        return [0.0] * len(FUNCTIONALS)
    out = [float(np.mean(finite)), float(np.std(finite))]
    for func in FUNCTIONALS[2:]:
        out.append(float(np.percentile(finite, PERCENTILES[func], method="linear")))
    return out


def _temporal_features(voiced: np.ndarray, frame_rate: float) -> list:
    n = voiced.size
    if n == 0:
        return [0.0, 0.0, 0.0]
    fraction = float(np.mean(voiced))
    run_lengths = []
    count = 0
    for v in voiced:
        if v:
            count += 1
        elif count:
            run_lengths.append(count)
            count = 0
    if count:
        run_lengths.append(count)
    duration_s = n / frame_rate
    per_s = len(run_lengths) / duration_s
    mean_run_ms = float(np.mean(run_lengths)) / frame_rate * 1000.0 if run_lengths else 0.0
    return [fraction, per_s, mean_run_ms]


def apply_functionals(tracks: dict, perturbation) -> FeatureVector:
    """Reduce frame tracks + perturbation stats to the 111-feature vector.

    `tracks` maps track kind -> FrameTrack and must contain every kind in
    FUNCTIONAL_TRACKS plus f0_hz (for the temporal features).
    `perturbation` may be None when no voiced cycles exist.
    """
    if not tracks:
        raise EmptyTrackSetError("no tracks given")
    missing = [kind for _, kind in FUNCTIONAL_TRACKS if kind not in tracks]
    if missing:
        raise EmptyTrackSetError(f"missing tracks: {missing}")

    values = []
    for _, kind in FUNCTIONAL_TRACKS:
        values.extend(_track_functionals(tracks[kind].values))

    if perturbation is None:
        perturbation = PerturbationStats(0.0, 0.0, 0.0)
    values.extend([perturbation.jitter_local, perturbation.shimmer_local,
                   perturbation.mean_hnr_db])

    f0 = tracks["f0_hz"]
    values.extend(_temporal_features(np.isfinite(f0.values), f0.frame_rate))

    return FeatureVector(GEMLITE_SET_ID, GEMLITE_FEATURE_NAMES, np.asarray(values))


class GemliteExtractor:
    """Computes the GeMLite feature vector for loudness-normalized segments."""

    def __init__(self, win_ms: float = 25.0, hop_ms: float = 10.0):
        self.win_ms = win_ms
        self.hop_ms = hop_ms

    @property
    def feature_names(self):
        return GEMLITE_FEATURE_NAMES

    def tracks(self, a: AudioBuffer):
        """All frame tracks plus the pitch object, keyed by track kind."""
        rect = frame_signal(a, self.win_ms, self.hop_ms, window="rect")
        hann = frame_signal(a, self.win_ms, self.hop_ms, window="hann")
        pitch = extract_f0(rect)
        voiced = pitch.voiced

        tracks = {"f0_hz": pitch.f0, "loudness_rms": extract_loudness(rect)}
        tracks.update(extract_spectral_measures(hann, voiced))
        tracks.update(extract_formants(rect, voiced))
        for tr in extract_mfcc(hann, n_coeffs=N_GEMLITE_MFCC):
            tracks[tr.kind] = tr
        return tracks, pitch

    def extract(self, a: AudioBuffer) -> FeatureVector:
        tracks, pitch = self.tracks(a)
        try:
            perturbation = extract_perturbation(a, pitch)
        except NoVoicedRunError:
            log.warning("%s: no voiced cycles, perturbation features set to 0", a.source_id)
            perturbation = None
        return apply_functionals(tracks, perturbation)
