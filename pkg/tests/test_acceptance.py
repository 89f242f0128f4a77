"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.

Run with `pytest -s tests/test_acceptance.py` to see the per-criterion lines.
"""

import copy
import itertools
import time

import numpy as np

from voicerisk.analysis import cles, mann_whitney_u
from voicerisk.audio import normalize_loudness
from voicerisk.cli import main
from voicerisk.evaluation import (
    bootstrap_ci,
    evaluate_cell,
    loso_plan,
    run_single_fold,
)
from voicerisk.features import GemliteExtractor, extract_spectral_measures
from voicerisk.features.framing import Frames
from voicerisk.segmentation import segment_by_alignment
from voicerisk.store import join_dataset
from voicerisk.svm import WeightedLinearSVC, WeightingPolicy, class_balance_weights, compose_instance_weights
from voicerisk.synth import CohortSpec, build_feature_cohort, build_signal_recordings, generate

FS = 16000


def _report(criterion: str, ok: bool, detail: str = ""):
    status = "PASS" if ok else "FAIL"
    print(f"[acceptance] {criterion}: {status}  {detail}")
    assert ok, f"{criterion} failed: {detail}"


# -- criterion 1: DSP oracles -------------------------------------------------

def test_criterion_1_dsp_oracles():
    t0 = time.time()
    spec = CohortSpec(n_subjects=4, high_risk_fraction=0.5, gender_split=0.5,
                      effect={}, seed=11, level="signal",
                      stories=("story1",), repetitions=1)
    extractor = GemliteExtractor()
    f0_errs, f1_errs = [], []
    for bundle in build_signal_recordings(spec):
        buf, _ = normalize_loudness(bundle.audio)
        for rec in segment_by_alignment(buf, bundle.entries, bundle.row):
            tracks, _ = extractor.tracks(rec.audio)
            truth = bundle.truth[rec.segment_key]
            f0_errs.append(abs(np.nanmedian(tracks["f0_hz"].values) - truth["f0_hz"])
                           / truth["f0_hz"])
            f1_errs.append(abs(np.nanmedian(tracks["f1_hz"].values) - truth["f1_hz"])
                           / truth["f1_hz"])

    imp = np.zeros(400)
    imp[0] = 1.0
    flat = extract_spectral_measures(Frames(imp[None, :], FS, 160, "rect"),
                                     np.array([True]))
    slope = abs(flat["slope_v0_500"].values[0])

    tone = 0.3 * np.sin(2 * np.pi * 500 * np.arange(400) / FS) * np.hanning(400)
    tone_tracks = extract_spectral_measures(Frames(tone[None, :], FS, 160, "rect"),
                                            np.array([True]))
    alpha = tone_tracks["alpha_ratio_db"].values[0]
    ham = tone_tracks["hammarberg_db"].values[0]

    elapsed = time.time() - t0
    ok = (max(f0_errs) < 0.02 and max(f1_errs) < 0.05 and slope < 1e-3
          and alpha < -30.0 and ham > 30.0 and elapsed < 30.0)
    _report("criterion 1 (DSP oracles)", ok,
            f"F0 max err {max(f0_errs) * 100:.3f}% (<2%), "
            f"F1 max err {max(f1_errs) * 100:.2f}% (<5%), "
            f"flat slope {slope:.1e} (<1e-3), tone alpha {alpha:.1f} dB (<-30), "
            f"hammarberg {ham:.1f} dB (>30), runtime {elapsed:.1f}s (<30s)")


# -- criterion 2: statistics oracle -------------------------------------------

def _u_low_oracle(x_low, x_high):
    x_low = np.asarray(x_low, float)
    x_high = np.asarray(x_high, float)
    diff = x_low[:, None] - x_high[None, :]
    return float(np.count_nonzero(diff > 0) + 0.5 * np.count_nonzero(diff == 0))


def _permutation_p_oracle(x_low, x_high):
    pooled = np.concatenate([x_low, x_high])
    n1 = len(x_low)
    us = []
    for combo in itertools.combinations(range(len(pooled)), n1):
        mask = np.zeros(len(pooled), dtype=bool)
        mask[list(combo)] = True
        us.append(_u_low_oracle(pooled[mask], pooled[~mask]))
    us = np.asarray(us)
    u_obs = _u_low_oracle(x_low, x_high)
    lo = np.count_nonzero(us <= u_obs) / us.size
    hi = np.count_nonzero(us >= u_obs) / us.size
    return min(1.0, 2.0 * min(lo, hi))


def _cles_oracle(x_low, x_high):
    wins = ties = 0
    for high in x_high:
        for low in x_low:
            if high > low:
                wins += 1
            elif high == low:
                ties += 1
    return (wins + 0.5 * ties) / (len(x_low) * len(x_high))


def test_criterion_2_statistics_oracle():
    rng = np.random.default_rng(2024)
    max_p_diff = 0.0
    u_exact = True
    for _ in range(100):
        n1 = int(rng.integers(1, 8))
        n2 = int(rng.integers(1, 8))
        # unique draws keep the pooled sample tie-free, so the exact
        # enumeration path is the oracle's domain
        pool = rng.choice(1_000_000, size=n1 + n2, replace=False).astype(float)
        x_low, x_high = pool[:n1], pool[n1:]
        res = mann_whitney_u(x_low, x_high)
        assert res.method == "exact"
        if res.u_statistic != _u_low_oracle(x_low, x_high):
            u_exact = False
        max_p_diff = max(max_p_diff, abs(res.p_value - _permutation_p_oracle(x_low, x_high)))

    cles_exact = True
    for _ in range(50):
        n1 = int(rng.integers(1, 8))
        n2 = int(rng.integers(1, 8))
        x_low = rng.integers(0, 6, n1).astype(float)   # ties likely
        x_high = rng.integers(0, 6, n2).astype(float)
        if cles(x_low, x_high) != _cles_oracle(x_low, x_high):
            cles_exact = False

    ok = u_exact and max_p_diff < 1e-12 and cles_exact
    _report("criterion 2 (statistics oracle)", ok,
            f"U exact over 100 datasets: {u_exact}, max |p - oracle| "
            f"{max_p_diff:.2e} (<1e-12), cles exact over 50 tied datasets: {cles_exact}")


# -- criterion 3: solver oracles ----------------------------------------------

def test_criterion_3_solver_oracles():
    rng = np.random.default_rng(33)

    def problem(n, d, seed):
        r = np.random.default_rng(seed)
        y = np.where(r.random(n) < 0.4, 1, 0)
        if len(np.unique(y)) < 2:
            y[0], y[1] = 0, 1
        X = r.standard_normal((n, d))
        X[:, 0] += 1.2 * (2 * y - 1)
        return X, y

    # weight duplication
    X, y = problem(40, 5, 1)
    w = np.ones(len(y))
    w[5] = 3.0
    m_w = WeightedLinearSVC(C=0.3, tol=1e-12, max_epochs=100_000).fit(X, y, w)
    X_dup = np.concatenate([X, X[5:6], X[5:6]])
    y_dup = np.concatenate([y, y[5:6], y[5:6]])
    m_d = WeightedLinearSVC(C=0.3, tol=1e-12, max_epochs=100_000).fit(
        X_dup, y_dup, np.ones(len(y_dup)))
    dup_gap = abs(m_w.primal_objective(X, y, w)
                  - m_d.primal_objective(X_dup, y_dup, np.ones(len(y_dup))))

    # zero-weight removal
    X2, y2 = problem(60, 4, 2)
    w2 = np.ones(len(y2))
    w2[10:25] = 0.0
    m_all = WeightedLinearSVC(C=0.5, tol=1e-10).fit(X2, y2, w2)
    keep = w2 > 0
    m_sub = WeightedLinearSVC(C=0.5, tol=1e-10).fit(X2[keep], y2[keep], w2[keep])
    removal_gap = max(float(np.max(np.abs(m_all.coef_ - m_sub.coef_))),
                      abs(m_all.intercept_ - m_sub.intercept_))

    # lambda=0 vs in-group subset
    n = 120
    genders = np.where(rng.random(n) < 0.5, "female", "male").astype(object)
    X3, y3 = problem(n, 5, 3)
    policy = WeightingPolicy("gender_exclusive", 0.0, "female")
    s3 = compose_instance_weights(y3, genders, policy)
    m_l0 = WeightedLinearSVC(C=0.5, tol=1e-10).fit(X3, y3, s3)
    mask = genders == "female"
    m_in = WeightedLinearSVC(C=0.5, tol=1e-10).fit(
        X3[mask], y3[mask], class_balance_weights(y3[mask]))
    va = np.concatenate([m_l0.coef_, [m_l0.intercept_]])
    vb = np.concatenate([m_in.coef_, [m_in.intercept_]])
    cosine = float(va @ vb / (np.linalg.norm(va) * np.linalg.norm(vb)))

    # dual monotonicity on 50 random problems
    monotone = True
    for seed in range(50):
        Xm, ym = problem(int(rng.integers(20, 80)), int(rng.integers(2, 8)), 100 + seed)
        model = WeightedLinearSVC(C=float(rng.choice([1e-2, 0.1, 1.0]))).fit(Xm, ym)
        d = model.dual_objective_path_
        if not np.all(np.diff(d) >= -1e-9 * (1.0 + np.abs(d[:-1]))):
            monotone = False

    ok = dup_gap < 1e-8 and removal_gap < 1e-9 and cosine >= 0.999 and monotone
    _report("criterion 3 (solver oracles)", ok,
            f"duplication objective gap {dup_gap:.2e} (<1e-8), zero-weight removal "
            f"{removal_gap:.2e} (<1e-9), lambda0 subset cosine {cosine:.6f} (>=0.999), "
            f"dual monotone on 50 problems: {monotone}")


# -- criterion 4: mechanism reproduction ----------------------------------------

def test_criterion_4_gender_mechanism():
    t0 = time.time()
    exclusive, global_ = [], []
    for seed in range(10):
        spec = CohortSpec(n_subjects=20, high_risk_fraction=0.35, gender_split=0.5,
                          effect={"AlphaRatio_mean": (1.5, -1.5)}, noise_sd=1.0,
                          seed=seed, level="feature")
        rows, table = build_feature_cohort(spec)
        ds = join_dataset(rows, [table])
        exclusive.append(evaluate_cell(ds, "lambda0", "global", seed=seed,
                                       n_boot=0).subject_ba)
        global_.append(evaluate_cell(ds, "global", "global", seed=seed,
                                     n_boot=0).subject_ba)
    med_ex = float(np.median(exclusive))
    med_gl = float(np.median(global_))
    elapsed = time.time() - t0
    ok = med_ex >= 0.85 and med_gl <= 0.65 and elapsed < 120.0
    _report("criterion 4 (gender mechanism)", ok,
            f"gender-exclusive median subject BA {med_ex:.3f} (>=0.85), "
            f"global median {med_gl:.3f} (<=0.65), runtime {elapsed:.1f}s (<120s)")


# -- criterion 5: phrase normalization contract ---------------------------------

def test_criterion_5_phrase_normalization():
    from voicerisk.scaling import PhraseScaler

    spec = CohortSpec(n_subjects=8, high_risk_fraction=0.5, gender_split=0.5,
                      seed=17, level="feature", n_filler_features=6)
    rows, table = build_feature_cohort(spec)
    ds = join_dataset(rows, [table])
    scaler = PhraseScaler().fit(ds.X, ds.phrases)
    out = scaler.transform(ds.X, ds.phrases)
    worst_mean, worst_std = 0.0, 0.0
    for phrase in set(ds.phrases):
        idx = [i for i, p in enumerate(ds.phrases) if p == phrase]
        group = out[idx]
        worst_mean = max(worst_mean, float(np.max(np.abs(group.mean(axis=0)))))
        worst_std = max(worst_std, float(np.max(np.abs(group.std(axis=0) - 1.0))))
    ok = worst_mean < 1e-10 and worst_std < 1e-10
    _report("criterion 5 (phrase normalization)", ok,
            f"worst |group mean| {worst_mean:.2e} (<1e-10), "
            f"worst |group std - 1| {worst_std:.2e} (<1e-10)")


# -- criterion 6: leakage -------------------------------------------------------

def test_criterion_6_leakage():
    spec = CohortSpec(n_subjects=10, high_risk_fraction=0.4, gender_split=0.5,
                      effect={"AlphaRatio_mean": (1.0, -1.0)}, seed=29,
                      level="feature", stories=("story1", "story2"),
                      repetitions=1, n_filler_features=4)
    rows, table = build_feature_cohort(spec)
    ds = join_dataset(rows, [table])
    plan = loso_plan(ds.subject_labels(), seed=5)
    rng = np.random.default_rng(0)
    all_equal = True
    for norm in ("global", "phrase"):
        for fold in plan.folds:
            base = run_single_fold(ds, fold, "global", norm)
            ds2 = copy.deepcopy(ds)
            mask = ds2.subjects == fold.test_subject
            ds2.X[mask] = rng.standard_normal(ds2.X[mask].shape) * 1e4
            out = run_single_fold(ds2, fold, "global", norm)
            if (out.scaler_digest != base.scaler_digest
                    or out.model_digest != base.model_digest):
                all_equal = False
    _report("criterion 6 (leakage)", all_equal,
            f"scaler and model hashes invariant to held-out perturbation in all "
            f"{2 * len(plan.folds)} fold runs (both norm modes)")


# -- criterion 7: bootstrap calibration -------------------------------------------

def test_criterion_7_bootstrap_calibration():
    rng = np.random.default_rng(7)
    true_ba = 0.7
    n_subj, per_subj = 40, 10
    covered = 0
    trials = 200
    for trial in range(trials):
        subjects, y_true, y_pred = [], [], []
        for i in range(n_subj):
            label = int(i < n_subj // 2)
            for _ in range(per_subj):
                subjects.append(f"s{i}")
                y_true.append(label)
                correct = rng.random() < true_ba
                y_pred.append(label if correct else 1 - label)
        ci = bootstrap_ci(np.array(subjects, dtype=object), np.array(y_true),
                          np.array(y_pred), n_boot=1000, seed=trial)
        lo, hi = ci.segment_ci
        if lo <= true_ba <= hi:
            covered += 1
    coverage = covered / trials

    subjects = np.array(["a"] * 5 + ["b"] * 5, dtype=object)
    y = np.array([1] * 5 + [0] * 5)
    ci = bootstrap_ci(subjects, y, y, n_boot=500, seed=0)
    perfect = ci.segment_ci == (1.0, 1.0) and ci.subject_ci == (1.0, 1.0)

    ok = coverage >= 0.90 and perfect
    _report("criterion 7 (bootstrap calibration)", ok,
            f"95% CI coverage {coverage:.3f} over {trials} trials (>=0.90), "
            f"all-correct CI == (1.0, 1.0): {perfect}")


# -- criterion 8: determinism ------------------------------------------------------

def test_criterion_8_cli_determinism(tmp_path):
    cohort = tmp_path / "cohort"
    spec = CohortSpec(n_subjects=10, high_risk_fraction=0.4, gender_split=0.5,
                      effect={"AlphaRatio_mean": (1.5, -1.5)}, noise_sd=0.8,
                      seed=31, level="feature", stories=("story1", "story2"),
                      repetitions=1, n_filler_features=4)
    generate(spec, cohort)
    manifest = str(cohort / "manifest.csv")
    features = f"synth={cohort / 'features.csv'}"

    outputs = {}
    for tag, threads in (("r1", "1"), ("r2", "1"), ("t8", "8")):
        rpt = tmp_path / f"report_{tag}.json"
        md = tmp_path / f"report_{tag}.md"
        rc = main(["evaluate", "--manifest", manifest, "--features", features,
                   "--modelling", "all", "--norm", "all", "--seed", "13",
                   "--bootstrap", "300", "--threads", threads,
                   "--out", str(rpt), "--markdown", str(md)])
        assert rc == 0
        outputs[tag] = rpt.read_bytes() + md.read_bytes()

    analyses = {}
    for tag, threads in (("r1", "1"), ("r2", "1"), ("t8", "8")):
        out = tmp_path / f"analysis_{tag}.json"
        rc = main(["analyze", "--manifest", manifest, "--features", features,
                   "--seed", "13", "--threads", threads, "--out", str(out)])
        assert rc == 0
        analyses[tag] = out.read_bytes()

    eval_ok = outputs["r1"] == outputs["r2"] == outputs["t8"]
    analyze_ok = analyses["r1"] == analyses["r2"] == analyses["t8"]
    ok = eval_ok and analyze_ok
    _report("criterion 8 (determinism)", ok,
            f"evaluate byte-identical across runs and threads 1 vs 8: {eval_ok}, "
            f"analyze: {analyze_ok}")


# -- criterion 9: gender-opposed distribution summary ------------------------------

def test_criterion_9_group_summary_pattern():
    from voicerisk.analysis import summarize_by_risk_and_gender
    from voicerisk.scaling import GlobalScaler

    hits = 0
    for seed in range(10):
        spec = CohortSpec(n_subjects=20, high_risk_fraction=0.35, gender_split=0.5,
                          effect={"AlphaRatio_mean": (1.5, -1.5)}, noise_sd=1.0,
                          seed=seed, level="feature")
        rows, table = build_feature_cohort(spec)
        ds = join_dataset(rows, [table])
        col = list(ds.feature_names).index("AlphaRatio_mean")
        values = GlobalScaler().fit(ds.X).transform(ds.X)[:, col]
        summary = summarize_by_risk_and_gender(values, ds.y, ds.genders)
        if (summary["high_male"]["mean"] > summary["low_male"]["mean"]
                and summary["high_female"]["mean"] < summary["low_female"]["mean"]):
            hits += 1
    ok = hits >= 9
    _report("criterion 9 (gender-opposed summary)", ok,
            f"opposed pattern reproduced in {hits}/10 seeds (>=9)")
