"""LOSO cross-validation, nested cost tuning, bootstrap CIs and the result grid.

Every subject is a test fold once; normalization statistics and models are
fitted on the fold's training subjects only. The cost parameter is tuned
per outer fold on 5 subject-grouped inner folds by subject-level balanced
accuracy after majority voting (ties prefer the smaller, more regularized
cost). Gender-based modelling trains one model per gender and routes each
test subject to its own gender's model; confidence intervals come from
resampling segment predictions before majority voting.
"""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateDataError,
    DegenerateResamplingError,
    DimMismatchError,
    EmptyGroupError,
    SingleClassError,
    SingleClassTruthError,
    TooFewSubjectsError,
)
from .scaling import GlobalScaler, PhraseScaler
from .store import Dataset
from .svm import (
    MODE_GENDER_EXCLUSIVE,
    MODE_GENDER_SOFT,
    MODE_GLOBAL,
    TuningGrid,
    WeightedLinearSVC,
    WeightingPolicy,
    compose_instance_weights,
)
from .validation import stable_digest

MODELLING_MODES = ("global", "lambda0", "lambda0.1")
NORM_MODES = ("global", "phrase")
DEFAULT_BOOTSTRAP = 1000
SOFT_LAMBDA = 0.1


def policy_for(modelling: str, target_gender=None) -> WeightingPolicy:
    if modelling == "global":
        return WeightingPolicy(MODE_GLOBAL)
    if modelling == "lambda0":
        return WeightingPolicy(MODE_GENDER_EXCLUSIVE, 0.0, target_gender)
    if modelling == "lambda0.1":
        return WeightingPolicy(MODE_GENDER_SOFT, SOFT_LAMBDA, target_gender)
    raise ValueError(f"unknown modelling mode {modelling!r}")


# -- fold planning -------------------------------------------------------

@dataclass(frozen=True)
class Fold:
    test_subject: str
    train_subjects: tuple
    inner: tuple  # tuple of tuples partitioning train_subjects


@dataclass(frozen=True)
class FoldPlan:
    folds: tuple
    seed: int


def loso_plan(subject_labels: dict, seed: int, n_inner: int = 5) -> FoldPlan:
    """One fold per subject; inner folds are stratified by risk label."""
    subjects = sorted(subject_labels)
    if len(subjects) < 3:
        raise TooFewSubjectsError(f"need >= 3 subjects, got {len(subjects)}")
    if len(set(subject_labels.values())) < 2:
        raise SingleClassError("all subjects share one risk label")

    folds = []
    for fold_idx, test_subject in enumerate(subjects):
        train = [s for s in subjects if s != test_subject]
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(fold_idx,)))
        groups = [[] for _ in range(min(n_inner, len(train)))]
        slot = 0
        for label in (0, 1):
            members = [s for s in train if subject_labels[s] == label]
            rng.shuffle(members)
            for s in members:
                groups[slot % len(groups)].append(s)
                slot += 1
        folds.append(Fold(
            test_subject=test_subject,
            train_subjects=tuple(train),
            inner=tuple(tuple(sorted(g)) for g in groups),
        ))
    return FoldPlan(folds=tuple(folds), seed=seed)


# -- metrics -------------------------------------------------------------

def balanced_accuracy(y_true, y_pred) -> float:
    """Mean of per-class recalls."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise DimMismatchError("y_true and y_pred must share a shape")
    classes = np.unique(y_true)
    if classes.size < 2:
        raise SingleClassTruthError(f"y_true contains one class: {classes.tolist()}")
    recalls = [np.mean(y_pred[y_true == c] == c) for c in classes]
    return float(np.mean(recalls))


def majority_vote(subjects, preds) -> dict:
    """Per-subject majority label over segment predictions; ties go high."""
    subjects = np.asarray(subjects, dtype=object)
    preds = np.asarray(preds)
    if subjects.size == 0:
        raise EmptyGroupError("no predictions to vote over")
    votes = {}
    for subject in sorted(set(subjects.tolist())):
        p = preds[subjects == subject]
        if p.size == 0:
            raise EmptyGroupError(f"subject {subject} has no predictions")
        votes[subject] = int(2 * int(np.sum(p == 1)) >= p.size)
    return votes


@dataclass(frozen=True)
class BootstrapCI:
    segment_ci: tuple
    subject_ci: tuple


def bootstrap_ci(subjects, y_true, y_pred, n_boot: int = DEFAULT_BOOTSTRAP,
                 level: float = 0.95, seed: int = 0) -> BootstrapCI:
    """Percentile CIs for segment and majority-voted subject balanced accuracy.

    Segment records are resampled with replacement; per resample the
    subject metric is computed after majority voting within the resample.
    Resamples whose truth collapses to one class are redrawn, up to
    10 * n_boot attempts.
    """
    subjects = np.asarray(subjects, dtype=object)
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = (np.asarray(y_pred) == 1).astype(np.int64)
    n = y_true.size
    if n < 2:
        raise DegenerateResamplingError("need >= 2 records to bootstrap")

    uniq, codes = np.unique(subjects.astype(str), return_inverse=True)
    n_subj = uniq.size
    subj_label = np.zeros(n_subj, dtype=np.int64)
    subj_label[codes] = y_true

    rng = np.random.default_rng(seed)
    collected = []
    attempts = 0
    while sum(len(c) for c in collected) < n_boot:
        want = n_boot - sum(len(c) for c in collected)
        attempts += want
        if attempts > 10 * n_boot:
            raise DegenerateResamplingError(
                f"exceeded {10 * n_boot} resampling attempts without "
                f"{n_boot} two-class resamples"
            )
        idx = rng.integers(0, n, size=(want, n))
        t = y_true[idx]
        valid = (t.max(axis=1) == 1) & (t.min(axis=1) == 0)
        if valid.any():
            collected.append(idx[valid])
    idx = np.concatenate(collected, axis=0)[:n_boot]

    t = y_true[idx]
    p = y_pred[idx]
    pos = (t == 1).sum(axis=1)
    neg = (t == 0).sum(axis=1)
    tp = ((t == 1) & (p == 1)).sum(axis=1)
    tn = ((t == 0) & (p == 0)).sum(axis=1)
    seg_ba = 0.5 * (tp / pos + tn / neg)

    rows = np.repeat(np.arange(n_boot), n)
    cols = codes[idx].ravel()
    tot = np.zeros((n_boot, n_subj))
    np.add.at(tot, (rows, cols), 1.0)
    posv = np.zeros((n_boot, n_subj))
    np.add.at(posv, (rows, cols), p.ravel().astype(np.float64))
    present = tot > 0
    votes = (2.0 * posv >= tot) & present

    high = subj_label == 1
    low = ~high
    n_high = present[:, high].sum(axis=1)
    n_low = present[:, low].sum(axis=1)
    r_high = votes[:, high].sum(axis=1) / n_high
    r_low = (present[:, low] & ~votes[:, low]).sum(axis=1) / n_low
    subj_ba = 0.5 * (r_high + r_low)

    q = [100.0 * (1.0 - level) / 2.0, 100.0 * (1.0 + level) / 2.0]
    seg_ci = tuple(float(v) for v in np.percentile(seg_ba, q))
    subj_ci = tuple(float(v) for v in np.percentile(subj_ba, q))
    return BootstrapCI(segment_ci=seg_ci, subject_ci=subj_ci)


# -- fold execution ------------------------------------------------------

@dataclass
class FoldOutcome:
    test_subject: str
    test_rows: np.ndarray
    preds: np.ndarray
    margins: np.ndarray
    chosen_cost: float
    model_weights: np.ndarray
    model_bias: float
    model_digest: str
    scaler_digest: str
    converged: bool


def _rows_by_subject(ds: Dataset) -> dict:
    rows = {}
    for i, s in enumerate(ds.subjects):
        rows.setdefault(str(s), []).append(i)
    return {s: np.asarray(idx, dtype=np.int64) for s, idx in sorted(rows.items())}


def _gather_rows(rows_by_subject, subjects) -> np.ndarray:
    parts = [rows_by_subject[s] for s in subjects]
    return np.sort(np.concatenate(parts)) if parts else np.empty(0, dtype=np.int64)


def _fit_scaler(ds: Dataset, fit_rows: np.ndarray, norm: str):
    if norm == "global":
        scaler = GlobalScaler().fit(ds.X[fit_rows])
        transform = lambda rows: scaler.transform(ds.X[rows])  # noqa: E731
    elif norm == "phrase":
        phrases_fit = [ds.phrases[i] for i in fit_rows]
        scaler = PhraseScaler().fit(ds.X[fit_rows], phrases_fit)
        transform = lambda rows: scaler.transform(  # noqa: E731
            ds.X[rows], [ds.phrases[i] for i in rows])
    else:
        raise ValueError(f"unknown normalisation mode {norm!r}")
    return scaler, transform


def _scaler_fit_rows(ds: Dataset, train_rows: np.ndarray, policy: WeightingPolicy) -> np.ndarray:
    # Gender-exclusive models learn normalization statistics in-group only.
    if policy.mode == MODE_GENDER_EXCLUSIVE:
        mask = ds.genders[train_rows] == policy.target_gender
        return train_rows[mask]
    return train_rows


def _tune_cost(ds: Dataset, fold: Fold, policy: WeightingPolicy, norm: str,
               grid: TuningGrid, rows_by_subject: dict, subject_labels: dict) -> float:
    subject_genders = ds.subject_genders()
    scores = {c: [] for c in grid.costs}
    for val_subjects in fold.inner:
        if not val_subjects:
            continue
        train_subjects = [s for s in fold.train_subjects if s not in val_subjects]
        if not train_subjects:
            continue
        if policy.mode == MODE_GLOBAL:
            score_subjects = list(val_subjects)
        else:
            score_subjects = [s for s in val_subjects
                              if subject_genders[s] == policy.target_gender]
        if len({subject_labels[s] for s in score_subjects}) < 2:
            continue  # cannot score this inner fold; skipping is C-independent

        tr = _gather_rows(rows_by_subject, train_subjects)
        va = _gather_rows(rows_by_subject, score_subjects)
        try:
            weights = compose_instance_weights(ds.y[tr], ds.genders[tr], policy)
            fit_rows = _scaler_fit_rows(ds, tr, policy)
            if fit_rows.size < 2:
                continue
            _, transform = _fit_scaler(ds, fit_rows, norm)
        except (SingleClassError, DegenerateDataError):
            continue
        Xtr = transform(tr)
        Xva = transform(va)
        y_tr = ds.y[tr]
        va_subjects = ds.subjects[va]
        va_truth = np.array([subject_labels[s] for s in sorted(set(va_subjects.tolist()))])
        for c in grid.costs:
            model = WeightedLinearSVC(C=c).fit(Xtr, y_tr, weights)
            preds = model.predict(Xva)
            votes = majority_vote(va_subjects, preds)
            vote_arr = np.array([votes[s] for s in sorted(votes)])
            scores[c].append(balanced_accuracy(va_truth, vote_arr))

    best_cost = None
    best_score = -np.inf
    for c in grid.costs:  # descending; later (smaller) costs win ties
        score = float(np.mean(scores[c])) if scores[c] else 0.5
        if score >= best_score:
            best_score = score
            best_cost = c
    return best_cost


def run_single_fold(ds: Dataset, fold: Fold, modelling: str, norm: str,
                    grid: TuningGrid = TuningGrid()) -> FoldOutcome:
    """Tune, fit and predict one LOSO fold. Pure function of its inputs."""
    rows_by_subject = _rows_by_subject(ds)
    subject_labels = ds.subject_labels()
    subject_genders = ds.subject_genders()
    target = subject_genders[fold.test_subject] if modelling != "global" else None
    policy = policy_for(modelling, target)

    cost = _tune_cost(ds, fold, policy, norm, grid, rows_by_subject, subject_labels)
    train_rows = _gather_rows(rows_by_subject, fold.train_subjects)
    test_rows = rows_by_subject[fold.test_subject]

    weights = compose_instance_weights(ds.y[train_rows], ds.genders[train_rows], policy)
    fit_rows = _scaler_fit_rows(ds, train_rows, policy)
    scaler, transform = _fit_scaler(ds, fit_rows, norm)
    model = WeightedLinearSVC(C=cost).fit(transform(train_rows), ds.y[train_rows], weights)

    margins = model.decision_function(transform(test_rows))
    preds = np.where(margins >= 0.0, 1, 0)
    return FoldOutcome(
        test_subject=fold.test_subject,
        test_rows=test_rows,
        preds=preds,
        margins=margins,
        chosen_cost=cost,
        model_weights=model.coef_.copy(),
        model_bias=model.intercept_,
        model_digest=model.digest(),
        scaler_digest=scaler.digest(),
        converged=model.converged_,
    )


# -- cell + grid ---------------------------------------------------------

@dataclass
class CellResult:
    features: str
    modelling: str
    norm: str
    segment_ba: float
    subject_ba: float
    segment_ci: tuple
    subject_ci: tuple
    subject_votes: dict          # subject -> {"true", "vote", "n_segments"}
    chosen_costs: dict           # test subject -> tuned C
    predictions: np.ndarray      # per dataset row
    margins: np.ndarray
    fold_outcomes: list = field(default_factory=list)
    feature_names: tuple = ()

    def to_dict(self) -> dict:
        return {
            "features": self.features,
            "modelling": self.modelling,
            "normalisation": self.norm,
            "segment_ba": self.segment_ba,
            "subject_ba": self.subject_ba,
            "segment_ci": list(self.segment_ci),
            "subject_ci": list(self.subject_ci),
            "chosen_costs": {s: c for s, c in sorted(self.chosen_costs.items())},
            "subjects": [
                {"subject": s, **info} for s, info in sorted(self.subject_votes.items())
            ],
        }


def _bootstrap_seed(seed: int, features: str, modelling: str, norm: str) -> int:
    digest = stable_digest("bootstrap", seed, features, modelling, norm)
    return int(digest[:16], 16) % (2 ** 63 - 1)


def evaluate_cell(ds: Dataset, modelling: str, norm: str,
                  grid: TuningGrid = TuningGrid(), seed: int = 0,
                  n_boot: int = DEFAULT_BOOTSTRAP, threads: int = 1,
                  features_name: str = "features",
                  plan: FoldPlan = None) -> CellResult:
    """Run the full LOSO loop for one (features, modelling, norm) cell."""
    subject_labels = ds.subject_labels()
    if plan is None:
        plan = loso_plan(subject_labels, seed)

    def worker(fold):
        return run_single_fold(ds, fold, modelling, norm, grid)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(worker, plan.folds))
    else:
        outcomes = [worker(fold) for fold in plan.folds]

    preds = np.zeros(ds.n_rows, dtype=np.int64)
    margins = np.zeros(ds.n_rows, dtype=np.float64)
    chosen = {}
    for out in outcomes:
        preds[out.test_rows] = out.preds
        margins[out.test_rows] = out.margins
        chosen[out.test_subject] = out.chosen_cost

    segment_ba = balanced_accuracy(ds.y, preds)
    votes = majority_vote(ds.subjects, preds)
    truth = np.array([subject_labels[s] for s in sorted(votes)])
    vote_arr = np.array([votes[s] for s in sorted(votes)])
    subject_ba = balanced_accuracy(truth, vote_arr)

    if n_boot > 0:
        ci = bootstrap_ci(ds.subjects, ds.y, preds, n_boot=n_boot,
                          seed=_bootstrap_seed(seed, features_name, modelling, norm))
        segment_ci, subject_ci = ci.segment_ci, ci.subject_ci
    else:
        segment_ci = (segment_ba, segment_ba)
        subject_ci = (subject_ba, subject_ba)

    subject_votes = {
        s: {
            "true": subject_labels[s],
            "vote": votes[s],
            "n_segments": int(np.sum(ds.subjects == s)),
        }
        for s in sorted(votes)
    }
    return CellResult(
        features=features_name,
        modelling=modelling,
        norm=norm,
        segment_ba=segment_ba,
        subject_ba=subject_ba,
        segment_ci=segment_ci,
        subject_ci=subject_ci,
        subject_votes=subject_votes,
        chosen_costs=chosen,
        predictions=preds,
        margins=margins,
        fold_outcomes=outcomes,
        feature_names=ds.feature_names,
    )


@dataclass
class EvalReport:
    seed: int
    grid_costs: tuple
    cells: list

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "grid": {"costs": list(self.grid_costs)},
            "cells": [c.to_dict() for c in self.cells],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_markdown(self) -> str:
        return report_markdown(self.to_dict())


def report_markdown(report: dict) -> str:
    """Markdown table mirroring the results-grid layout.

    Cells read `segment (lo-hi) / subject (lo-hi)` in percent.
    """
    def fmt(cell):
        s = cell["segment_ba"] * 100
        u = cell["subject_ba"] * 100
        slo, shi = (v * 100 for v in cell["segment_ci"])
        ulo, uhi = (v * 100 for v in cell["subject_ci"])
        return (f"{s:.0f} ({slo:.0f}-{shi:.0f}) / "
                f"{u:.0f} ({ulo:.0f}-{uhi:.0f})")

    cells = report["cells"]
    columns = []
    for modelling in MODELLING_MODES:
        for norm in NORM_MODES:
            if any(c["modelling"] == modelling and c["normalisation"] == norm
                   for c in cells):
                label = {"global": "Global", "lambda0": "lambda=0",
                         "lambda0.1": "lambda=0.1"}[modelling]
                columns.append((modelling, norm, f"{label} / {norm} norm"))

    feature_sets = []
    for c in cells:
        if c["features"] not in feature_sets:
            feature_sets.append(c["features"])

    lines = ["| Features | " + " | ".join(h for _, _, h in columns) + " |",
             "|" + "---|" * (len(columns) + 1)]
    lookup = {(c["features"], c["modelling"], c["normalisation"]): c for c in cells}
    for fs in feature_sets:
        row = [fs]
        for modelling, norm, _ in columns:
            cell = lookup.get((fs, modelling, norm))
            row.append(fmt(cell) if cell else "-")
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"


def run_experiment(manifest_rows, tables: dict, feature_sets,
                   modelling_modes=MODELLING_MODES, norm_modes=NORM_MODES,
                   grid: TuningGrid = TuningGrid(), seed: int = 0,
                   n_boot: int = DEFAULT_BOOTSTRAP, threads: int = 1) -> EvalReport:
    """Evaluate every (feature set, modelling, normalisation) cell."""
    from .store import join_dataset

    cells = []
    for fs_name in feature_sets:
        ds = join_dataset(manifest_rows, [tables[fs_name]])
        plan = loso_plan(ds.subject_labels(), seed)
        for modelling in modelling_modes:
            for norm in norm_modes:
                cells.append(evaluate_cell(
                    ds, modelling, norm, grid=grid, seed=seed, n_boot=n_boot,
                    threads=threads, features_name=fs_name, plan=plan,
                ))
    return EvalReport(seed=seed, grid_costs=grid.costs, cells=cells)
