"""voicerisk: speech-based suicide-risk screening pipeline.

Phrase segmentation, interpretable acoustic features, global/phrase
normalization, gender-based weighted linear SVM modelling, LOSO evaluation
with bootstrap confidence intervals, and acoustic feature analysis.
"""

from .audio import AudioBuffer, normalize_loudness, read_wav, resample_linear, write_wav
from .errors import ConfigError, DataError, VoiceRiskError
from .features import (
    FeatureVector,
    GEMLITE_FEATURE_NAMES,
    GemliteExtractor,
    apply_functionals,
)
from .scaling import GlobalScaler, PhraseScaler
from .segmentation import (
    AlignmentEntry,
    ManifestRow,
    PhraseId,
    SegmentRecord,
    load_alignment,
    load_manifest,
    segment_by_alignment,
    segment_by_energy,
)
from .store import Dataset, FeatureTable, join_dataset, load_embeddings, load_feature_csv
from .svm import (
    TuningGrid,
    WeightedLinearSVC,
    WeightingPolicy,
    class_balance_weights,
    compose_instance_weights,
    gender_instance_weights,
)
from .evaluation import (
    EvalReport,
    balanced_accuracy,
    bootstrap_ci,
    evaluate_cell,
    loso_plan,
    majority_vote,
    run_experiment,
)
from .analysis import (
    analyze_dataset,
    cles,
    group_summary,
    mann_whitney_u,
    prune_redundant,
    rank_features,
)
from .synth import CohortSpec, assign_cohort, build_feature_cohort, build_signal_recordings, generate

__version__ = "0.1.0"

__all__ = [
    "AudioBuffer", "normalize_loudness", "read_wav", "resample_linear", "write_wav",
    "ConfigError", "DataError", "VoiceRiskError",
    "FeatureVector", "GEMLITE_FEATURE_NAMES", "GemliteExtractor", "apply_functionals",
    "GlobalScaler", "PhraseScaler",
    "AlignmentEntry", "ManifestRow", "PhraseId", "SegmentRecord",
    "load_alignment", "load_manifest", "segment_by_alignment", "segment_by_energy",
    "Dataset", "FeatureTable", "join_dataset", "load_embeddings", "load_feature_csv",
    "TuningGrid", "WeightedLinearSVC", "WeightingPolicy",
    "class_balance_weights", "compose_instance_weights", "gender_instance_weights",
    "EvalReport", "balanced_accuracy", "bootstrap_ci", "evaluate_cell",
    "loso_plan", "majority_vote", "run_experiment",
    "analyze_dataset", "cles", "group_summary", "mann_whitney_u",
    "prune_redundant", "rank_features",
    "CohortSpec", "assign_cohort", "build_feature_cohort",
    "build_signal_recordings", "generate",
    "__version__",
]
