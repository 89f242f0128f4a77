"""Feature standardization: one global scaler or one scaler per phrase.

Both scalers use the population standard deviation (divide by N) so a
fitted training set has exactly unit variance, with a floor that maps
near-constant features to std 1. Fitting happens strictly on training
rows; transform never mutates the fitted state.
"""

import json
import logging

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import DimMismatchError, TooFewRowsError
from .segmentation import PhraseId
from .validation import check_matrix, stable_digest

log = logging.getLogger(__name__)

STD_FLOOR = 1e-8


def _fit_stats(X: np.ndarray, std_floor: float):
    means = X.mean(axis=0)
    stds = X.std(axis=0)  # population std
    stds = np.where(stds < std_floor, 1.0, stds)
    return means, stds


class GlobalScaler(BaseEstimator, TransformerMixin):
    """Zero-mean unit-variance scaling fitted on the whole training set."""

    def __init__(self, std_floor: float = STD_FLOOR):
        self.std_floor = std_floor

    def fit(self, X, y=None):
        X = check_matrix(X, name="X")
        if X.shape[0] < 2:
            raise TooFewRowsError(f"need >= 2 rows to fit, got {X.shape[0]}")
        self.means_, self.stds_ = _fit_stats(X, self.std_floor)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        X = check_matrix(X, n_features=self.n_features_in_, name="X")
        return (X - self.means_) / self.stds_

    def digest(self) -> str:
        return stable_digest("global", self.means_, self.stds_)

    def to_dict(self) -> dict:
        return {"kind": "global", "means": self.means_.tolist(), "stds": self.stds_.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "GlobalScaler":
        scaler = cls()
        scaler.means_ = np.asarray(d["means"], dtype=np.float64)
        scaler.stds_ = np.asarray(d["stds"], dtype=np.float64)
        scaler.n_features_in_ = scaler.means_.size
        return scaler


class PhraseScaler(BaseEstimator):
    """Per-sentence scaling with a global fallback for sparse phrases.

    Phrases with fewer than two training rows (and phrases never seen in
    training) are served by a global scaler fitted on all training rows.
    """

    def __init__(self, std_floor: float = STD_FLOOR):
        self.std_floor = std_floor

    def fit(self, X, phrases):
        X = check_matrix(X, name="X")
        if X.shape[0] < 2:
            raise TooFewRowsError(f"need >= 2 rows to fit, got {X.shape[0]}")
        if len(phrases) != X.shape[0]:
            raise DimMismatchError(
                f"{len(phrases)} phrase ids for {X.shape[0]} rows"
            )
        self.fallback_ = GlobalScaler(self.std_floor).fit(X)
        groups = {}
        for i, phrase in enumerate(phrases):
            groups.setdefault(phrase, []).append(i)
        self.scalers_ = {}
        for phrase in sorted(groups):
            idx = groups[phrase]
            if len(idx) >= 2:
                self.scalers_[phrase] = _fit_stats(X[idx], self.std_floor)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X, phrases):
        X = check_matrix(X, n_features=self.n_features_in_, name="X")
        if len(phrases) != X.shape[0]:
            raise DimMismatchError(f"{len(phrases)} phrase ids for {X.shape[0]} rows")
        out = np.empty_like(X)
        warned = set()
        for i, phrase in enumerate(phrases):
            stats = self.scalers_.get(phrase)
            if stats is None:
                if phrase not in warned:
                    warned.add(phrase)
                    log.warning("phrase %s not fitted, using global fallback", phrase)
                out[i] = (X[i] - self.fallback_.means_) / self.fallback_.stds_
            else:
                means, stds = stats
                out[i] = (X[i] - means) / stds
        return out

    def fit_transform(self, X, phrases):
        return self.fit(X, phrases).transform(X, phrases)

    def digest(self) -> str:
        parts = ["phrase", self.fallback_.means_, self.fallback_.stds_]
        for phrase in sorted(self.scalers_):
            means, stds = self.scalers_[phrase]
            parts.extend([phrase.key, means, stds])
        return stable_digest(*parts)

    def to_dict(self) -> dict:
        return {
            "kind": "phrase",
            "fallback": self.fallback_.to_dict(),
            "phrases": {
                phrase.key: {"means": m.tolist(), "stds": s.tolist()}
                for phrase, (m, s) in sorted(self.scalers_.items())
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PhraseScaler":
        scaler = cls()
        scaler.fallback_ = GlobalScaler.from_dict(d["fallback"])
        scaler.scalers_ = {}
        for key, stats in d["phrases"].items():
            story, idx = key.split("/")
            scaler.scalers_[PhraseId(story, int(idx))] = (
                np.asarray(stats["means"], dtype=np.float64),
                np.asarray(stats["stds"], dtype=np.float64),
            )
        scaler.n_features_in_ = scaler.fallback_.n_features_in_
        return scaler


def save_scaler(path, scaler) -> None:
    with open(str(path), "w", encoding="utf-8") as fh:
        json.dump(scaler.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_scaler(path):
    with open(str(path), encoding="utf-8") as fh:
        d = json.load(fh)
    if d.get("kind") == "phrase":
        return PhraseScaler.from_dict(d)
    return GlobalScaler.from_dict(d)
