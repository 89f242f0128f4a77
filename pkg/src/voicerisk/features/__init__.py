"""Frame-level descriptors and segment-level functionals."""

from .framing import Frames, FrameTrack, frame_signal, extract_loudness
from .pitch import PitchTrack, extract_f0, hnr_track
from .spectral import extract_spectral_measures, extract_mfcc, mel_filterbank
from .formants import extract_formants
from .perturbation import PerturbationStats, extract_perturbation
from .gemlite import (
    FeatureVector,
    GemliteExtractor,
    GEMLITE_FEATURE_NAMES,
    GEMLITE_SET_ID,
    apply_functionals,
)

__all__ = [
    "Frames", "FrameTrack", "frame_signal", "extract_loudness",
    "PitchTrack", "extract_f0", "hnr_track",
    "extract_spectral_measures", "extract_mfcc", "mel_filterbank",
    "extract_formants",
    "PerturbationStats", "extract_perturbation",
    "FeatureVector", "GemliteExtractor", "GEMLITE_FEATURE_NAMES",
    "GEMLITE_SET_ID", "apply_functionals",
]
