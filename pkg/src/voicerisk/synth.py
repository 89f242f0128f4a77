"""Synthetic cohorts with controllable gender-specific risk effects.

Two generation levels share one subject-assignment scheme:

* feature level emits feature tables directly (per-subject base drawn from
  a gender-conditioned prior, plus the gender's risk shift for high-risk
  subjects, plus segment noise) and isolates the modelling/evaluation
  stack from DSP error;
* signal level synthesizes harmonic phrases with a shaped spectral tilt
  and two formant resonators, so the acoustic front end can be checked
  against generated ground truth (F0, F1, tilt per segment).

Everything is a pure function of the spec, including its seed.
"""

import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .audio import AudioBuffer, write_wav
from .errors import InvalidSpecError
from .segmentation import (
    STORY_SENTENCE_COUNTS,
    AlignmentEntry,
    ManifestRow,
    PhraseId,
    write_manifest,
)
from .store import FeatureTable, write_feature_csv

SAMPLE_RATE = 16_000

# Gender-conditioned voice priors: (mean, sd), draws truncated at +-2 sd
# so formant recovery stays within its validated accuracy envelope.
F0_PRIOR = {"male": (120.0, 15.0), "female": (210.0, 20.0)}
F1_PRIOR = {"male": (620.0, 25.0), "female": (720.0, 25.0)}
F2_PRIOR = {"male": (1700.0, 40.0), "female": (1900.0, 40.0)}
F1_BANDWIDTH_HZ = {"male": 110.0, "female": 160.0}
F2_BANDWIDTH_HZ = 130.0
TILT_PRIOR = (-2.0, 0.5)  # dB per octave
NOISE_FLOOR_DB = -25.0

# Unit scales for signal-level effect shifts (sigma per key).
SIGNAL_EFFECT_SIGMA = {"f0": None, "tilt": 1.5, "f1": 40.0}  # f0 uses the gender prior sd

DEFAULT_GENDER_OPPOSED_EFFECT = {"AlphaRatio_mean": (1.5, -1.5)}


@dataclass(frozen=True)
class CohortSpec:
    n_subjects: int = 20
    high_risk_fraction: float = 0.35
    gender_split: float = 0.5
    effect: dict = field(default_factory=lambda: dict(DEFAULT_GENDER_OPPOSED_EFFECT))
    noise_sd: float = 1.0
    seed: int = 0
    level: str = "feature"
    stories: tuple = ("story1", "story2", "story3")
    repetitions: int = 2
    n_filler_features: int = 9
    subject_sd: float = 0.25
    phrase_duration_s: tuple = (0.9, 1.3)
    gap_s: float = 0.4

    def __post_init__(self):
        object.__setattr__(self, "stories", tuple(self.stories))
        object.__setattr__(self, "phrase_duration_s", tuple(self.phrase_duration_s))
        effect = {str(k): (float(v[0]), float(v[1])) for k, v in self.effect.items()}
        object.__setattr__(self, "effect", effect)
        self.validate()

    def validate(self):
        if self.n_subjects < 4:
            raise InvalidSpecError("n_subjects must be >= 4")
        if not 0.0 <= self.high_risk_fraction <= 1.0:
            raise InvalidSpecError("high_risk_fraction must be in [0, 1]")
        if not 0.0 <= self.gender_split <= 1.0:
            raise InvalidSpecError("gender_split must be in [0, 1]")
        if self.level not in ("feature", "signal"):
            raise InvalidSpecError(f"level must be feature or signal, got {self.level!r}")
        if self.noise_sd < 0 or self.subject_sd < 0:
            raise InvalidSpecError("noise_sd and subject_sd must be >= 0")
        for story in self.stories:
            if story not in STORY_SENTENCE_COUNTS:
                raise InvalidSpecError(f"unknown story {story!r}")
        if not self.stories:
            raise InvalidSpecError("at least one story required")
        if self.repetitions not in (1, 2):
            raise InvalidSpecError("repetitions must be 1 or 2")
        if self.level == "signal":
            unknown = set(self.effect) - set(SIGNAL_EFFECT_SIGMA)
            if unknown:
                raise InvalidSpecError(
                    f"signal-level effect keys must be in {sorted(SIGNAL_EFFECT_SIGMA)}, "
                    f"got {sorted(unknown)}"
                )
        n_high = int(round(self.n_subjects * self.high_risk_fraction))
        if not 0 < n_high < self.n_subjects:
            raise InvalidSpecError("cohort needs both risk classes")
        n_female = int(round(self.n_subjects * self.gender_split))
        if not 0 < n_female < self.n_subjects:
            raise InvalidSpecError("cohort needs both genders")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["stories"] = list(self.stories)
        d["phrase_duration_s"] = list(self.phrase_duration_s)
        d["effect"] = {k: list(v) for k, v in self.effect.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CohortSpec":
        d = dict(d)
        if "effect" in d:
            d["effect"] = {k: tuple(v) for k, v in d["effect"].items()}
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "CohortSpec":
        with open(str(path), encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class SubjectInfo:
    index: int
    subject_id: str
    gender: str
    risk_score: int

    @property
    def risk_label(self) -> int:
        return int(self.risk_score >= 5)


def assign_cohort(spec: CohortSpec) -> list:
    """Deterministic subject roster: genders, risk labels and scores."""
    n = spec.n_subjects
    n_female = int(round(n * spec.gender_split))
    genders = ["female" if i < n_female else "male" for i in range(n)]
    n_high = int(round(n * spec.high_risk_fraction))

    # Proportional high-risk quota per gender via largest remainder,
    # breaking the tie toward male (mirrors the 4m/3f reference split).
    n_male = n - n_female
    quota = {"female": n_high * n_female / n, "male": n_high * n_male / n}
    counts = {g: int(math.floor(quota[g])) for g in quota}
    leftover = n_high - sum(counts.values())
    order = sorted(quota, key=lambda g: (-(quota[g] - counts[g]), g != "male"))
    for g in order[:leftover]:
        counts[g] += 1
    counts["female"] = min(counts["female"], n_female)
    counts["male"] = min(counts["male"], n_male)

    rng = np.random.default_rng(np.random.SeedSequence(entropy=(spec.seed, 911)))
    high_idx = set()
    for gender in ("female", "male"):
        members = [i for i in range(n) if genders[i] == gender]
        chosen = rng.choice(len(members), size=counts[gender], replace=False)
        high_idx.update(members[int(c)] for c in chosen)

    subjects = []
    for i in range(n):
        if i in high_idx:
            score = int(rng.integers(5, 7))
        else:
            score = int(rng.integers(1, 5))
        subjects.append(SubjectInfo(
            index=i, subject_id=f"s{i:03d}", gender=genders[i], risk_score=score,
        ))
    return subjects


def _segment_layout(spec: CohortSpec):
    """(story, repetition, sentence_index) triples in manifest order."""
    layout = []
    for story in spec.stories:
        for rep in range(1, spec.repetitions + 1):
            for sent in range(STORY_SENTENCE_COUNTS[story]):
                layout.append((story, rep, sent))
    return layout


def _manifest_rows(spec: CohortSpec, subjects):
    rows = []
    for subj in subjects:
        for story in spec.stories:
            for rep in range(1, spec.repetitions + 1):
                rows.append(ManifestRow(
                    subject_id=subj.subject_id,
                    gender=subj.gender,
                    risk_score=subj.risk_score,
                    story_id=story,
                    repetition=rep,
                    audio_path="",
                    alignment_path="",
                ))
    return rows


# -- feature level -------------------------------------------------------

def _feature_prior(name: str, gender: str):
    if name.startswith("F0"):
        return F0_PRIOR[gender]
    return (0.0, 1.0)


def build_feature_cohort(spec: CohortSpec):
    """Feature-level cohort: manifest rows plus an in-memory feature table."""
    subjects = assign_cohort(spec)
    names = tuple(sorted(spec.effect)) + tuple(
        f"filler_{i:02d}" for i in range(spec.n_filler_features)
    )
    layout = _segment_layout(spec)
    n_seg = len(layout)

    rows = {}
    for subj in subjects:
        rng = np.random.default_rng(np.random.SeedSequence(entropy=(spec.seed, subj.index)))
        base = np.empty(len(names))
        shift = np.zeros(len(names))
        sigma = np.empty(len(names))
        for j, name in enumerate(names):
            mu, sd = _feature_prior(name, subj.gender)
            sigma[j] = sd
            base[j] = mu + spec.subject_sd * sd * rng.standard_normal()
            if subj.risk_label and name in spec.effect:
                male_shift, female_shift = spec.effect[name]
                shift[j] = (male_shift if subj.gender == "male" else female_shift) * sd
        noise = rng.standard_normal((n_seg, len(names))) * (spec.noise_sd * sigma)
        values = base + shift + noise
        for row_idx, (story, rep, sent) in enumerate(layout):
            key = f"{subj.subject_id}/{story}/{sent}/{rep}"
            rows[key] = values[row_idx]

    table = FeatureTable(set_id="gemlite", names=names, rows=rows)
    return _manifest_rows(spec, subjects), table


# -- signal level --------------------------------------------------------

@dataclass(frozen=True)
class VoiceParams:
    f0_hz: float
    f1_hz: float
    f1_bw_hz: float
    f2_hz: float
    tilt_db_per_octave: float

    def truth_row(self) -> dict:
        return {
            "f0_hz": self.f0_hz,
            "f1_hz": self.f1_hz,
            "f1_bw_hz": self.f1_bw_hz,
            "f2_hz": self.f2_hz,
            "tilt_db_per_octave": self.tilt_db_per_octave,
        }


def _truncated_normal(rng, mu: float, sd: float, max_sigma: float = 2.0) -> float:
    return mu + sd * float(np.clip(rng.standard_normal(), -max_sigma, max_sigma))


def _subject_voice(spec: CohortSpec, subj: SubjectInfo) -> VoiceParams:
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(spec.seed, subj.index, 7)))
    f0_sd = F0_PRIOR[subj.gender][1]
    f0 = _truncated_normal(rng, *F0_PRIOR[subj.gender])
    f1 = _truncated_normal(rng, *F1_PRIOR[subj.gender])
    f2 = _truncated_normal(rng, *F2_PRIOR[subj.gender])
    tilt = _truncated_normal(rng, *TILT_PRIOR)
    if subj.risk_label:
        col = 0 if subj.gender == "male" else 1
        for key, shifts in spec.effect.items():
            sigma = SIGNAL_EFFECT_SIGMA[key]
            if key == "f0":
                f0 += shifts[col] * f0_sd
            elif key == "f1":
                f1 += shifts[col] * sigma
            elif key == "tilt":
                tilt += shifts[col] * sigma
    f0 = float(np.clip(f0, 70.0, 320.0))
    return VoiceParams(f0_hz=f0, f1_hz=float(f1),
                       f1_bw_hz=F1_BANDWIDTH_HZ[subj.gender], f2_hz=float(f2),
                       tilt_db_per_octave=float(tilt))


def _resonator(x: np.ndarray, fc: float, bw: float, fs: int) -> np.ndarray:
    r = math.exp(-math.pi * bw / fs)
    theta = 2.0 * math.pi * fc / fs
    a = np.array([1.0, -2.0 * r * math.cos(theta), r * r])
    return lfilter([1.0 - r], a, x)


VIBRATO_DEPTH = 0.005
VIBRATO_RATE_HZ = 5.0


def _synth_phrase(rng, voice: VoiceParams, dur_s: float, fs: int = SAMPLE_RATE,
                  noise_db: float = NOISE_FLOOR_DB) -> np.ndarray:
    n = int(round(dur_s * fs))
    t = np.arange(n) / fs
    # A +-0.5 % vibrato sweeps the harmonics across the formant envelope,
    # which steadies frame-median formant estimates.
    vib_phase = rng.uniform(0.0, 2.0 * math.pi)
    f_inst = voice.f0_hz * (1.0 + VIBRATO_DEPTH * np.sin(
        2.0 * math.pi * VIBRATO_RATE_HZ * t + vib_phase))
    phi = 2.0 * math.pi * np.cumsum(f_inst) / fs
    k_max = max(2, int(5000.0 // voice.f0_hz))
    k = np.arange(1, k_max + 1)
    amps = 10.0 ** (voice.tilt_db_per_octave * np.log2(k) / 20.0)
    x = (amps[:, None] * np.cos(k[:, None] * phi[None, :])).sum(axis=0)
    x = _resonator(x, voice.f1_hz, voice.f1_bw_hz, fs)
    x = _resonator(x, voice.f2_hz, F2_BANDWIDTH_HZ, fs)
    rms = float(np.sqrt(np.mean(x ** 2)))
    x = x + rng.standard_normal(n) * rms * 10.0 ** (noise_db / 20.0)
    peak = float(np.max(np.abs(x)))
    return x * (0.25 / peak)


@dataclass
class RecordingBundle:
    row: ManifestRow
    audio: AudioBuffer
    entries: list
    truth: dict  # segment_key -> truth row dict


def build_signal_recordings(spec: CohortSpec):
    """Yield one synthesized recording per manifest row, with ground truth."""
    subjects = assign_cohort(spec)
    story_index = {s: i for i, s in enumerate(sorted(STORY_SENTENCE_COUNTS))}
    for subj in subjects:
        voice = _subject_voice(spec, subj)
        for story in spec.stories:
            for rep in range(1, spec.repetitions + 1):
                rng = np.random.default_rng(np.random.SeedSequence(
                    entropy=(spec.seed, subj.index, story_index[story], rep)))
                n_sent = STORY_SENTENCE_COUNTS[story]
                pieces = []
                entries = []
                truth = {}
                cursor = int(round(spec.gap_s / 2 * SAMPLE_RATE))
                pieces.append(np.zeros(cursor))
                for sent in range(n_sent):
                    dur = float(rng.uniform(*spec.phrase_duration_s))
                    phrase = _synth_phrase(rng, voice, dur)
                    start_s = cursor / SAMPLE_RATE
                    end_s = (cursor + phrase.size) / SAMPLE_RATE
                    entries.append(AlignmentEntry(
                        phrase=PhraseId(story, sent), start_s=start_s, end_s=end_s))
                    key = f"{subj.subject_id}/{story}/{sent}/{rep}"
                    truth[key] = voice.truth_row()
                    pieces.append(phrase)
                    gap = np.zeros(int(round(spec.gap_s * SAMPLE_RATE)))
                    pieces.append(gap)
                    cursor += phrase.size + gap.size
                samples = np.concatenate(pieces)
                name = f"{subj.subject_id}_{story}_r{rep}"
                row = ManifestRow(
                    subject_id=subj.subject_id, gender=subj.gender,
                    risk_score=subj.risk_score, story_id=story, repetition=rep,
                    audio_path=f"wav/{name}.wav",
                    alignment_path=f"align/{name}.json",
                )
                yield RecordingBundle(
                    row=row,
                    audio=AudioBuffer(samples, SAMPLE_RATE, source_id=name),
                    entries=entries,
                    truth=truth,
                )


# -- file emission -------------------------------------------------------

def _write_alignment(path, entries) -> None:
    payload = [
        {"story_id": e.phrase.story_id, "sentence_index": e.phrase.sentence_index,
         "start_s": e.start_s, "end_s": e.end_s, "text": e.text}
        for e in entries
    ]
    with open(str(path), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def generate(spec: CohortSpec, out_dir) -> dict:
    """Write a full cohort to disk; returns the emitted file map."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest_path = out / "manifest.csv"

    if spec.level == "feature":
        rows, table = build_feature_cohort(spec)
        write_manifest(manifest_path, rows)
        features_path = out / "features.csv"
        write_feature_csv(features_path, table)
        return {"manifest": str(manifest_path), "features": str(features_path)}

    (out / "wav").mkdir(exist_ok=True)
    (out / "align").mkdir(exist_ok=True)
    rows = []
    truth_rows = []
    truth_columns = ("f0_hz", "f1_hz", "f1_bw_hz", "f2_hz", "tilt_db_per_octave")
    for bundle in build_signal_recordings(spec):
        write_wav(out / bundle.row.audio_path, bundle.audio)
        _write_alignment(out / bundle.row.alignment_path, bundle.entries)
        rows.append(bundle.row)
        for key in sorted(bundle.truth):
            truth_rows.append((key, bundle.truth[key]))
    write_manifest(manifest_path, rows)
    truth_path = out / "truth.csv"
    with open(truth_path, "w", encoding="utf-8") as fh:
        fh.write("segment_key," + ",".join(truth_columns) + "\n")
        for key, row in truth_rows:
            fh.write(key + "," + ",".join(repr(float(row[c])) for c in truth_columns) + "\n")
    return {"manifest": str(manifest_path), "truth": str(truth_path)}
