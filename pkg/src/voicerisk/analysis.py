"""Feature importance ranking, Mann-Whitney U tests and group summaries.

Features are ranked by the mean absolute linear-SVM coefficient across the
LOSO fold models, pruned for redundancy by Spearman correlation, and the
survivors are compared between low- and high-risk groups with a two-sided
Mann-Whitney U test plus the common-language effect size. Group-difference
tests run on per-subject mean feature values: subjects are the independent
units, and pooling correlated segments would make null p-values wildly
anticonservative.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as scipy_stats

from .errors import EmptyGroupError, HeterogeneousModelsError

EXACT_MAX_PAIRS = 10_000


# -- ranking -------------------------------------------------------------

@dataclass(frozen=True)
class RankedFeature:
    name: str
    mean_abs_coef: float
    rank: int


def rank_features(models) -> list:
    """Mean |coefficient| per feature over fold models, sorted descending.

    `models` is a sequence of (feature_names, weights) pairs, one per LOSO
    fold. Ties break alphabetically by name.
    """
    models = list(models)
    if not models:
        raise HeterogeneousModelsError("no models to rank")
    names = tuple(models[0][0])
    coefs = []
    for model_names, weights in models:
        if tuple(model_names) != names:
            raise HeterogeneousModelsError("fold models disagree on feature names")
        weights = np.asarray(weights, dtype=np.float64)
        if weights.size != len(names):
            raise HeterogeneousModelsError(
                f"{weights.size} coefficients for {len(names)} features"
            )
        coefs.append(np.abs(weights))
    # Sorting per feature before averaging keeps the result bit-identical
    # under any fold ordering.
    mean_abs = np.sort(np.stack(coefs), axis=0).mean(axis=0)
    order = sorted(range(len(names)), key=lambda i: (-mean_abs[i], names[i]))
    return [RankedFeature(names[i], float(mean_abs[i]), rank + 1)
            for rank, i in enumerate(order)]


def prune_redundant(ranked, feature_matrix, feature_names, rho_max: float = 0.85,
                    top_k: int = 5) -> list:
    """Greedy top-down redundancy pruning by absolute Spearman correlation.

    A feature is dropped when it correlates above `rho_max` with any
    retained higher-ranked feature; the first `top_k` survivors remain.
    """
    if not ranked:
        raise EmptyGroupError("no ranked features to prune")
    X = np.asarray(feature_matrix, dtype=np.float64)
    col = {name: i for i, name in enumerate(feature_names)}
    survivors = []
    for feat in ranked:
        if len(survivors) == top_k:
            break
        x = X[:, col[feat.name]]
        redundant = False
        for kept in survivors:
            rho = scipy_stats.spearmanr(x, X[:, col[kept.name]]).statistic
            if np.isfinite(rho) and abs(rho) > rho_max:
                redundant = True
                break
        if not redundant:
            survivors.append(feat)
    return survivors


# -- Mann-Whitney U ------------------------------------------------------

@dataclass(frozen=True)
class UTestResult:
    u_statistic: float   # U of the low-risk sample
    p_value: float
    cles: float          # P(high > low) with ties counted half
    n_low: int
    n_high: int
    method: str          # "exact" or "normal_approx"

    def to_dict(self) -> dict:
        return {
            "u_statistic": self.u_statistic,
            "p_value": self.p_value,
            "cles": self.cles,
            "n_low": self.n_low,
            "n_high": self.n_high,
            "method": self.method,
        }


def cles(x_low, x_high) -> float:
    """Common-language effect size: share of (low, high) pairs with high > low."""
    x_low = np.asarray(x_low, dtype=np.float64)
    x_high = np.asarray(x_high, dtype=np.float64)
    if x_low.size == 0 or x_high.size == 0:
        raise EmptyGroupError("cles needs non-empty groups")
    diff = x_high[:, None] - x_low[None, :]
    greater = np.count_nonzero(diff > 0)
    ties = np.count_nonzero(diff == 0)
    return float((greater + 0.5 * ties) / diff.size)


def _u_distribution_counts(n1: int, n2: int) -> np.ndarray:
    """Number of label arrangements with each U value (no ties assumed).

    counts[u] is the coefficient of q^u in the Gaussian binomial
    [n1+n2 choose n1]_q, built by multiplying (1 - q^(n2+i)) / (1 - q^i)
    for i = 1..n1. Every intermediate polynomial has integer coefficients.
    """
    size = n1 * n2 + n1 + n2 + 2
    c = np.zeros(size, dtype=np.float64)
    c[0] = 1.0
    for i in range(1, n1 + 1):
        shift = n2 + i
        c[shift:] -= c[:-shift].copy()
        # divide by (1 - q^i): out[u] = in[u] + out[u - i], i.e. a running
        # sum along each residue class mod i
        for r in range(i):
            np.cumsum(c[r::i], out=c[r::i])
    return c[: n1 * n2 + 1]


def _exact_two_sided_p(u: float, n1: int, n2: int) -> float:
    counts = _u_distribution_counts(n1, n2)
    total = counts.sum()
    k = int(round(u))
    cdf = counts[: k + 1].sum() / total
    sf = counts[k:].sum() / total
    return float(min(1.0, 2.0 * min(cdf, sf)))


def _normal_approx_p(u: float, n1: int, n2: int, pooled: np.ndarray) -> float:
    n = n1 + n2
    mu = n1 * n2 / 2.0
    _, tie_counts = np.unique(pooled, return_counts=True)
    tie_term = float(np.sum(tie_counts.astype(np.float64) ** 3 - tie_counts))
    var = (n1 * n2 / 12.0) * ((n + 1) - tie_term / (n * (n - 1)))
    if var <= 0.0:
        return 1.0
    # Continuity correction pulls |U - mu| toward the mean by 0.5.
    z = (abs(u - mu) - 0.5) / math.sqrt(var)
    if z < 0.0:
        z = 0.0
    return float(min(1.0, math.erfc(z / math.sqrt(2.0))))


def mann_whitney_u(x_low, x_high, alternative: str = "two_sided") -> UTestResult:
    """Two-sided Mann-Whitney U test with midranks.

    The p-value is exact (full enumeration of the U distribution) when
    n_low * n_high <= 10000 and the pooled values contain no ties;
    otherwise the tie- and continuity-corrected normal approximation
    applies.
    """
    if alternative != "two_sided":
        raise ValueError("only the two-sided alternative is implemented")
    x_low = np.asarray(x_low, dtype=np.float64)
    x_high = np.asarray(x_high, dtype=np.float64)
    if x_low.size == 0 or x_high.size == 0:
        raise EmptyGroupError("mann_whitney_u needs non-empty groups")
    n1, n2 = x_low.size, x_high.size

    pooled = np.concatenate([x_low, x_high])
    ranks = scipy_stats.rankdata(pooled)  # midranks for ties
    r1 = ranks[:n1].sum()
    u_low = float(r1 - n1 * (n1 + 1) / 2.0)

    has_ties = np.unique(pooled).size < pooled.size
    if n1 * n2 <= EXACT_MAX_PAIRS and not has_ties:
        p = _exact_two_sided_p(u_low, n1, n2)
        method = "exact"
    else:
        p = _normal_approx_p(u_low, n1, n2, pooled)
        method = "normal_approx"

    return UTestResult(
        u_statistic=u_low,
        p_value=p,
        cles=cles(x_low, x_high),
        n_low=n1,
        n_high=n2,
        method=method,
    )


# -- group summaries -----------------------------------------------------

def group_summary(values_by_group: dict) -> dict:
    """Box-plot statistics per group over jointly z-normalized values.

    `values_by_group` maps a group key (e.g. (risk_label, gender)) to the
    raw values of that group. Normalization uses the mean/std of all
    groups pooled, so group positions stay comparable.
    """
    if not values_by_group:
        raise EmptyGroupError("no groups given")
    arrays = {}
    for key, values in values_by_group.items():
        arr = np.asarray(values, dtype=np.float64)
        if arr.size == 0:
            raise EmptyGroupError(f"group {key} is empty")
        arrays[key] = arr
    pooled = np.concatenate(list(arrays.values()))
    mu = pooled.mean()
    sd = pooled.std()
    if sd < 1e-12:
        sd = 1.0
    out = {}
    for key, arr in arrays.items():
        z = (arr - mu) / sd
        out[key] = {
            "min": float(z.min()),
            "q1": float(np.percentile(z, 25)),
            "median": float(np.percentile(z, 50)),
            "q3": float(np.percentile(z, 75)),
            "max": float(z.max()),
            "mean": float(z.mean()),
            "n": int(arr.size),
        }
    return out


def _group_key_json(key) -> str:
    risk_label, gender = key
    return f"{'high' if risk_label else 'low'}_{gender}"


def summarize_by_risk_and_gender(values, risk_labels, genders) -> dict:
    """Plot-ready group summary keyed `high_female` / `low_male` etc."""
    values = np.asarray(values, dtype=np.float64)
    risk_labels = np.asarray(risk_labels)
    genders = np.asarray(genders, dtype=object)
    groups = {}
    for label in (0, 1):
        for gender in sorted(set(genders.tolist())):
            mask = (risk_labels == label) & (genders == gender)
            if mask.any():
                groups[(label, gender)] = values[mask]
    summary = group_summary(groups)
    return {_group_key_json(k): v for k, v in summary.items()}


# -- full analysis over a dataset ----------------------------------------

def subject_mean_values(values, subjects) -> dict:
    """Per-subject mean of a per-segment value column."""
    values = np.asarray(values, dtype=np.float64)
    subjects = np.asarray(subjects, dtype=object)
    return {s: float(values[subjects == s].mean())
            for s in sorted(set(subjects.tolist()))}


def analyze_dataset(ds, grid=None, seed: int = 0, modelling: str = "global",
                    norm: str = "global", rho_max: float = 0.85, top_k: int = 5,
                    scores=None, threads: int = 1) -> dict:
    """Rank features from LOSO fold models and test the pruned top features.

    U tests compare per-subject means of the globally normalized feature
    between low- and high-risk subjects. Group summaries (per risk x
    gender) are computed over segments, mirroring a box-plot view.
    """
    from .evaluation import TuningGrid, evaluate_cell
    from .scaling import GlobalScaler

    if grid is None:
        grid = TuningGrid()
    cell = evaluate_cell(ds, modelling, norm, grid=grid, seed=seed, n_boot=0,
                         threads=threads, features_name="ranking")
    models = [(ds.feature_names, out.model_weights) for out in cell.fold_outcomes]
    ranked = rank_features(models)

    Xn = GlobalScaler().fit(ds.X).transform(ds.X)
    top = prune_redundant(ranked, Xn, ds.feature_names, rho_max=rho_max, top_k=top_k)

    subject_labels = ds.subject_labels()
    col = {name: i for i, name in enumerate(ds.feature_names)}
    top_entries = []
    for feat in top:
        values = Xn[:, col[feat.name]]
        per_subject = subject_mean_values(values, ds.subjects)
        x_low = [v for s, v in per_subject.items() if subject_labels[s] == 0]
        x_high = [v for s, v in per_subject.items() if subject_labels[s] == 1]
        result = mann_whitney_u(x_low, x_high)
        top_entries.append({
            "name": feat.name,
            "rank": feat.rank,
            "mean_abs_coef": feat.mean_abs_coef,
            "u_test": result.to_dict(),
            "group_summary": summarize_by_risk_and_gender(values, ds.y, ds.genders),
        })

    report = {
        "seed": seed,
        "ranking_config": {"modelling": modelling, "normalisation": norm,
                           "rho_max": rho_max},
        "ranked_features": [
            {"name": f.name, "mean_abs_coef": f.mean_abs_coef, "rank": f.rank}
            for f in ranked
        ],
        "top_features": top_entries,
    }

    if scores is not None:
        score_summaries = {}
        for i, dim in enumerate(scores.names):
            values = np.array([scores.rows[k][i] for k in ds.segment_keys])
            score_summaries[dim] = summarize_by_risk_and_gender(values, ds.y, ds.genders)
        report["score_summaries"] = score_summaries
    return report
