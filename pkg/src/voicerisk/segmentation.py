"""Phrase segmentation: alignment-driven splitting plus an energy fallback.

Recordings are readings of three fixed stories with 6, 7 and 16 sentences.
Sentence boundaries normally come from an external alignment JSON; when no
alignment exists, a frame-energy voice activity fallback provides spans.
"""

import csv
import json
from dataclasses import dataclass

import numpy as np

from .audio import AudioBuffer
from .errors import (
    IndexOutOfRangeError,
    OutOfBoundsError,
    OverlapError,
    SchemaError,
    SilentInputError,
)

STORY_SENTENCE_COUNTS = {"story1": 6, "story2": 7, "story3": 16}
GENDERS = ("female", "male")
HIGH_RISK_CUTOFF = 5  # risk scores 5-6 count as high, near-term risk

MANIFEST_COLUMNS = (
    "subject_id", "gender", "risk_score", "story_id",
    "repetition", "audio_path", "alignment_path",
)


@dataclass(frozen=True, order=True)
class PhraseId:
    story_id: str
    sentence_index: int

    def __post_init__(self):
        if self.story_id not in STORY_SENTENCE_COUNTS:
            raise IndexOutOfRangeError(f"unknown story_id {self.story_id!r}")
        count = STORY_SENTENCE_COUNTS[self.story_id]
        if not 0 <= self.sentence_index < count:
            raise IndexOutOfRangeError(
                f"sentence_index {self.sentence_index} out of range for "
                f"{self.story_id} ({count} sentences)"
            )

    @property
    def key(self) -> str:
        return f"{self.story_id}/{self.sentence_index}"


@dataclass(frozen=True)
class AlignmentEntry:
    phrase: PhraseId
    start_s: float
    end_s: float
    text: str = ""

    def __post_init__(self):
        if not (0.0 <= self.start_s < self.end_s):
            raise SchemaError(
                f"invalid span [{self.start_s}, {self.end_s}) for {self.phrase.key}"
            )


@dataclass(frozen=True)
class SegmentRecord:
    subject_id: str
    gender: str
    risk_score: int
    risk_label: int
    phrase: PhraseId
    repetition: int
    audio: AudioBuffer

    def __post_init__(self):
        if self.gender not in GENDERS:
            raise SchemaError(f"gender must be one of {GENDERS}, got {self.gender!r}")
        if not 1 <= self.risk_score <= 6:
            raise SchemaError(f"risk_score must be in 1..6, got {self.risk_score}")
        expected = int(self.risk_score >= HIGH_RISK_CUTOFF)
        if self.risk_label != expected:
            raise SchemaError(
                f"risk_label {self.risk_label} inconsistent with score {self.risk_score}"
            )
        if self.repetition not in (1, 2):
            raise SchemaError(f"repetition must be 1 or 2, got {self.repetition}")

    @property
    def segment_key(self) -> str:
        return segment_key(self.subject_id, self.phrase.story_id,
                           self.phrase.sentence_index, self.repetition)


def segment_key(subject_id: str, story_id: str, sentence_index: int, repetition: int) -> str:
    return f"{subject_id}/{story_id}/{sentence_index}/{repetition}"


@dataclass(frozen=True)
class ManifestRow:
    subject_id: str
    gender: str
    risk_score: int
    story_id: str
    repetition: int
    audio_path: str
    alignment_path: str

    @property
    def risk_label(self) -> int:
        return int(self.risk_score >= HIGH_RISK_CUTOFF)

    def segment_keys(self):
        n = STORY_SENTENCE_COUNTS[self.story_id]
        return [segment_key(self.subject_id, self.story_id, i, self.repetition)
                for i in range(n)]


def load_manifest(path) -> list:
    """Read and validate the dataset manifest CSV."""
    rows = []
    with open(str(path), newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != list(MANIFEST_COLUMNS):
            raise SchemaError(
                f"manifest header must be {','.join(MANIFEST_COLUMNS)}, "
                f"got {reader.fieldnames}"
            )
        for lineno, rec in enumerate(reader, start=2):
            try:
                row = ManifestRow(
                    subject_id=rec["subject_id"].strip(),
                    gender=rec["gender"].strip(),
                    risk_score=int(rec["risk_score"]),
                    story_id=rec["story_id"].strip(),
                    repetition=int(rec["repetition"]),
                    audio_path=rec["audio_path"].strip(),
                    alignment_path=rec["alignment_path"].strip(),
                )
            except (KeyError, ValueError) as exc:
                raise SchemaError(f"manifest line {lineno}: {exc}") from exc
            if row.gender not in GENDERS:
                raise SchemaError(f"manifest line {lineno}: gender {row.gender!r}")
            if not 1 <= row.risk_score <= 6:
                raise SchemaError(f"manifest line {lineno}: risk_score {row.risk_score}")
            if row.story_id not in STORY_SENTENCE_COUNTS:
                raise SchemaError(f"manifest line {lineno}: story_id {row.story_id!r}")
            if row.repetition not in (1, 2):
                raise SchemaError(f"manifest line {lineno}: repetition {row.repetition}")
            rows.append(row)
    if not rows:
        raise SchemaError(f"manifest {path} has no rows")
    return rows


def write_manifest(path, rows) -> None:
    with open(str(path), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_COLUMNS)
        for r in rows:
            writer.writerow([r.subject_id, r.gender, r.risk_score, r.story_id,
                             r.repetition, r.audio_path, r.alignment_path])


def expand_manifest_keys(rows) -> list:
    """All segment keys implied by the manifest, in manifest order."""
    keys = []
    for row in rows:
        keys.extend(row.segment_keys())
    return keys


def load_alignment(path) -> list:
    """Read, validate and sort a sentence alignment JSON file."""
    with open(str(path), encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"alignment {path}: invalid JSON ({exc})") from exc
    if not isinstance(raw, list):
        raise SchemaError(f"alignment {path}: expected a JSON array")
    entries = []
    for i, obj in enumerate(raw):
        if not isinstance(obj, dict):
            raise SchemaError(f"alignment {path} entry {i}: expected an object")
        try:
            phrase = PhraseId(str(obj["story_id"]), int(obj["sentence_index"]))
            entry = AlignmentEntry(
                phrase=phrase,
                start_s=float(obj["start_s"]),
                end_s=float(obj["end_s"]),
                text=str(obj.get("text", "")),
            )
        except KeyError as exc:
            raise SchemaError(f"alignment {path} entry {i}: missing field {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"alignment {path} entry {i}: {exc}") from exc
        entries.append(entry)
    entries.sort(key=lambda e: e.start_s)
    for prev, nxt in zip(entries, entries[1:]):
        if nxt.start_s < prev.end_s:
            raise OverlapError(
                f"alignment {path}: {nxt.phrase.key} starting {nxt.start_s} "
                f"overlaps {prev.phrase.key} ending {prev.end_s}"
            )
    return entries


def segment_by_alignment(a: AudioBuffer, entries, meta: ManifestRow) -> list:
    """Slice one recording into SegmentRecords at the aligned boundaries."""
    records = []
    for entry in entries:
        i0 = int(round(entry.start_s * a.sample_rate))
        i1 = int(round(entry.end_s * a.sample_rate))
        if i1 > a.samples.size:
            raise OutOfBoundsError(
                f"{a.source_id!r}: entry {entry.phrase.key} ends at {entry.end_s}s "
                f"but the recording lasts {a.duration_s:.3f}s"
            )
        key = segment_key(meta.subject_id, entry.phrase.story_id,
                          entry.phrase.sentence_index, meta.repetition)
        records.append(SegmentRecord(
            subject_id=meta.subject_id,
            gender=meta.gender,
            risk_score=meta.risk_score,
            risk_label=meta.risk_label,
            phrase=entry.phrase,
            repetition=meta.repetition,
            audio=AudioBuffer(a.samples[i0:i1].copy(), a.sample_rate, source_id=key),
        ))
    return records


def segment_by_energy(a: AudioBuffer, min_pause_ms: float = 300.0,
                      min_seg_ms: float = 500.0, threshold_db: float = -40.0) -> list:
    """Energy-based fallback segmentation when no alignment file exists.

    Frames of 25 ms (10 ms hop) are marked voiced when their RMS is within
    `threshold_db` of the loudest frame. Voiced runs separated by pauses
    shorter than `min_pause_ms` are merged; runs shorter than `min_seg_ms`
    are dropped. Returns (start_s, end_s) spans.
    """
    fs = a.sample_rate
    win = int(round(0.025 * fs))
    hop = int(round(0.010 * fs))
    x = a.samples
    if x.size < win:
        raise SilentInputError(f"{a.source_id!r}: too short for energy segmentation")
    n_frames = (x.size - win) // hop + 1
    idx = np.arange(win)[None, :] + hop * np.arange(n_frames)[:, None]
    rms = np.sqrt(np.mean(x[idx] ** 2, axis=1))
    peak = rms.max()
    if peak == 0.0:
        raise SilentInputError(f"{a.source_id!r}: silent input")
    voiced = 20.0 * np.log10(np.maximum(rms, 1e-12) / peak) >= threshold_db

    runs = []
    start = None
    for i, v in enumerate(voiced):
        if v and start is None:
            start = i
        elif not v and start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, n_frames - 1))

    min_pause_frames = min_pause_ms / 1000.0 * fs / hop
    merged = []
    for run in runs:
        if merged and (run[0] - merged[-1][1] - 1) < min_pause_frames:
            merged[-1] = (merged[-1][0], run[1])
        else:
            merged.append(run)

    spans = []
    for f0, f1 in merged:
        start_s = f0 * hop / fs
        end_s = min((f1 * hop + win) / fs, a.duration_s)
        if (end_s - start_s) * 1000.0 >= min_seg_ms:
            spans.append((start_s, end_s))
    return spans
