"""Feature persistence and dataset assembly.

All feature representations (GeMLite functionals, externally computed
embedding vectors, emotion-dimension scores) live in flat CSV files keyed
by segment_key = subject/story/sentence/repetition and are joined against
the manifest into one design matrix.
"""

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DimMismatchError,
    DuplicateKeyError,
    MissingSegmentError,
    NonFiniteValueError,
    SchemaError,
)
from .segmentation import PhraseId

SCORE_COLUMNS = ("arousal", "dominance", "valence")


@dataclass
class FeatureTable:
    """One feature source: ordered names plus per-segment value rows."""

    set_id: str
    names: tuple
    rows: dict  # segment_key -> np.ndarray

    def __post_init__(self):
        self.names = tuple(self.names)

    @property
    def dim(self) -> int:
        return len(self.names)


def write_feature_csv(path, table: FeatureTable) -> None:
    """Write `segment_key,<names...>` rows; floats use repr for exact round-trip."""
    with open(str(path), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("segment_key",) + table.names)
        for key, values in table.rows.items():
            writer.writerow([key] + [repr(float(v)) for v in values])


def load_feature_csv(path, set_id=None) -> FeatureTable:
    """Read a feature CSV, validating width, finiteness and key uniqueness."""
    path = Path(path)
    if set_id is None:
        set_id = path.stem
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty feature file") from None
        if not header or header[0] != "segment_key":
            raise SchemaError(f"{path}: first column must be segment_key")
        names = tuple(header[1:])
        if not names:
            raise SchemaError(f"{path}: no feature columns")
        rows = {}
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            key = rec[0]
            if key in rows:
                raise DuplicateKeyError(f"{path} line {lineno}: duplicate key {key!r}")
            if len(rec) - 1 != len(names):
                raise DimMismatchError(
                    f"{path} line {lineno}: {len(rec) - 1} values, expected {len(names)}"
                )
            try:
                values = np.array([float(v) for v in rec[1:]], dtype=np.float64)
            except ValueError as exc:
                raise SchemaError(f"{path} line {lineno}: {exc}") from exc
            if not np.all(np.isfinite(values)):
                raise NonFiniteValueError(f"{path} line {lineno}: non-finite value")
            rows[key] = values
    return FeatureTable(set_id=set_id, names=names, rows=rows)


def load_embeddings(path, set_name=None, expected_dim=None) -> FeatureTable:
    """Read an externally computed embedding CSV (`segment_key,d0..d{D-1}`)."""
    path = Path(path)
    if set_name is None:
        set_name = path.stem
    table = load_feature_csv(path, set_id=f"embedding:{set_name}")
    expected_names = tuple(f"d{i}" for i in range(table.dim))
    if table.names != expected_names:
        raise SchemaError(
            f"{path}: embedding columns must be d0..d{table.dim - 1}, got {table.names[:4]}..."
        )
    if expected_dim is not None and table.dim != expected_dim:
        raise DimMismatchError(
            f"{path}: embedding dim {table.dim}, expected {expected_dim}"
        )
    return table


def load_dimensional_scores(path) -> FeatureTable:
    """Read arousal/dominance/valence scores keyed by segment."""
    table = load_feature_csv(path, set_id="scores")
    if table.names != SCORE_COLUMNS:
        raise SchemaError(
            f"{path}: score columns must be {','.join(SCORE_COLUMNS)}, got {table.names}"
        )
    return table


@dataclass
class Dataset:
    """Joined design matrix plus per-row metadata, in manifest order."""

    X: np.ndarray
    y: np.ndarray
    subjects: np.ndarray
    genders: np.ndarray
    risk_scores: np.ndarray
    phrases: list
    repetitions: np.ndarray
    segment_keys: list
    feature_names: tuple
    set_ids: tuple = ()

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    def subject_labels(self) -> dict:
        """Subject -> risk label, ordered by subject id."""
        out = {}
        for s, lab in zip(self.subjects, self.y):
            out.setdefault(str(s), int(lab))
        return dict(sorted(out.items()))

    def subject_genders(self) -> dict:
        out = {}
        for s, g in zip(self.subjects, self.genders):
            out.setdefault(str(s), str(g))
        return dict(sorted(out.items()))


def join_dataset(manifest_rows, sources) -> Dataset:
    """Align every manifest segment with each feature source.

    Row order follows the manifest; feature columns concatenate in source
    order. A single MissingSegmentError reports every absent key.
    """
    if isinstance(sources, FeatureTable):
        sources = [sources]
    sources = list(sources)
    if not sources:
        raise SchemaError("join_dataset needs at least one feature source")

    missing = []
    for src in sources:
        for row in manifest_rows:
            for key in row.segment_keys():
                if key not in src.rows:
                    missing.append(f"{src.set_id}:{key}")
    if missing:
        raise MissingSegmentError(missing)

    names = ()
    for src in sources:
        if len(sources) > 1:  # prefix to keep concatenated names unique
            names += tuple(f"{src.set_id}:{n}" for n in src.names)
        else:
            names += src.names

    keys, subj, gend, score, label, phrases, reps = [], [], [], [], [], [], []
    for row in manifest_rows:
        for sentence_index, key in enumerate(row.segment_keys()):
            keys.append(key)
            subj.append(row.subject_id)
            gend.append(row.gender)
            score.append(row.risk_score)
            label.append(row.risk_label)
            phrases.append(PhraseId(row.story_id, sentence_index))
            reps.append(row.repetition)

    X = np.empty((len(keys), sum(s.dim for s in sources)), dtype=np.float64)
    col = 0
    for src in sources:
        for i, key in enumerate(keys):
            X[i, col:col + src.dim] = src.rows[key]
        col += src.dim

    return Dataset(
        X=X,
        y=np.asarray(label, dtype=np.int64),
        subjects=np.asarray(subj, dtype=object),
        genders=np.asarray(gend, dtype=object),
        risk_scores=np.asarray(score, dtype=np.int64),
        phrases=phrases,
        repetitions=np.asarray(reps, dtype=np.int64),
        segment_keys=keys,
        feature_names=names,
        set_ids=tuple(s.set_id for s in sources),
    )
