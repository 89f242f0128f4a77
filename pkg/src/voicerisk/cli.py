"""Command-line surface: extract | evaluate | analyze | synth | report.

Every command is a pure function of its inputs, flags and seed; outputs
are byte-identical across reruns and thread counts. Exit codes: 2 for
configuration problems, 3 for data problems, 4 for internal errors.
"""

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .audio import DEFAULT_TARGET_RMS_DB, PIPELINE_RATE, normalize_loudness, read_wav, resample_linear
from .errors import ConfigError, DataError, VoiceRiskError
from .features import GEMLITE_FEATURE_NAMES, GemliteExtractor
from .segmentation import (
    AlignmentEntry,
    PhraseId,
    load_alignment,
    load_manifest,
    segment_by_alignment,
    segment_by_energy,
)
from .store import FeatureTable, join_dataset, load_dimensional_scores, load_feature_csv, write_feature_csv
from .svm import TuningGrid
from .analysis import analyze_dataset
from .evaluation import MODELLING_MODES, NORM_MODES, report_markdown, run_experiment
from .synth import CohortSpec, generate

log = logging.getLogger("voicerisk")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4


def _threads_default() -> int:
    raw = os.environ.get("VOICERISK_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _write_text(path, text: str) -> None:
    with open(str(path), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _write_json(path, obj) -> None:
    _write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _require_file(path, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"{what} not found: {p}")
    return p


def _resolve(base: Path, rel: str) -> Path:
    p = Path(rel)
    return p if p.is_absolute() else base / p


def _apply_config_file(args: argparse.Namespace) -> None:
    """Fill unset flags from the optional JSON config file."""
    if not getattr(args, "config", None):
        return
    path = _require_file(args.config, "config file")
    with open(path, encoding="utf-8") as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path}: invalid JSON ({exc})") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"config file {path}: expected a JSON object")
    for key, value in cfg.items():
        attr = key.replace("-", "_")
        if hasattr(args, attr) and getattr(args, attr) is None:
            setattr(args, attr, value)


# -- extract --------------------------------------------------------------

def _extract_recording(extractor, base, row, target_rms_db, fallback_vad):
    audio_path = _resolve(base, row.audio_path)
    if not audio_path.is_file():
        raise DataError(f"audio file not found: {audio_path}")
    buffer = read_wav(audio_path)
    buffer = resample_linear(buffer, PIPELINE_RATE)
    buffer, clipped = normalize_loudness(buffer, target_rms_db)
    if clipped:
        log.warning("%s: %d samples clipped during loudness normalization",
                    audio_path, clipped)

    align_path = _resolve(base, row.alignment_path) if row.alignment_path else None
    if align_path is not None and align_path.is_file():
        entries = load_alignment(align_path)
    elif fallback_vad:
        spans = segment_by_energy(buffer)
        entries = [AlignmentEntry(PhraseId(row.story_id, i), start_s, end_s)
                   for i, (start_s, end_s) in enumerate(spans)]
    else:
        raise DataError(
            f"missing alignment file: {align_path or '(none in manifest)'} "
            f"for {audio_path} (pass --fallback-vad to segment by energy)"
        )

    records = segment_by_alignment(buffer, entries, row)
    out = []
    for record in records:
        out.append((record.segment_key, extractor.extract(record.audio).values))
    return out


def cmd_extract(args) -> int:
    manifest_path = _require_file(args.manifest, "manifest")
    rows = load_manifest(manifest_path)
    base = manifest_path.parent
    extractor = GemliteExtractor()
    target = args.target_rms_db if args.target_rms_db is not None else DEFAULT_TARGET_RMS_DB

    def worker(row):
        return _extract_recording(extractor, base, row, target, args.fallback_vad)

    threads = args.threads or _threads_default()
    failures = []
    results = []
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = list(pool.map(_safe(worker), rows))
    else:
        futures = [_safe(worker)(row) for row in rows]
    for row, outcome in zip(rows, futures):
        if isinstance(outcome, Exception):
            log.error("recording %s/%s/r%d failed: %s", row.subject_id,
                      row.story_id, row.repetition, outcome)
            failures.append(outcome)
        else:
            results.extend(outcome)
            log.info("extracted %s/%s/r%d (%d segments)", row.subject_id,
                     row.story_id, row.repetition, len(outcome))

    if failures:
        raise DataError(f"{len(failures)} recording(s) failed feature extraction")

    table = FeatureTable("gemlite", GEMLITE_FEATURE_NAMES, dict(results))
    write_feature_csv(args.out, table)
    log.info("wrote %d feature rows to %s", len(table.rows), args.out)
    return EXIT_OK


def _safe(fn):
    def wrapped(arg):
        try:
            return fn(arg)
        except VoiceRiskError as exc:
            return exc
    return wrapped


# -- evaluate / analyze ----------------------------------------------------

def _sanitize_set_name(name: str) -> str:
    return name.replace(":", "_").replace("/", "_")


def _load_feature_tables(tokens, features_dir: Path) -> dict:
    tables = {}
    for token in tokens:
        if "=" in token:
            name, path = token.split("=", 1)
            path = Path(path)
        else:
            name = token
            path = features_dir / f"{_sanitize_set_name(name)}.csv"
        if not path.is_file():
            raise ConfigError(f"feature file for set {name!r} not found: {path}")
        tables[name] = load_feature_csv(path, set_id=name)
    return tables


def _parse_modes(raw: str, allowed, what: str):
    if raw is None or raw == "all":
        return tuple(allowed)
    modes = tuple(m.strip() for m in raw.split(",") if m.strip())
    for m in modes:
        if m not in allowed:
            raise ConfigError(f"unknown {what} mode {m!r}; allowed: {', '.join(allowed)}")
    return modes


def cmd_evaluate(args) -> int:
    manifest_path = _require_file(args.manifest, "manifest")
    rows = load_manifest(manifest_path)
    features_dir = Path(args.features_dir) if args.features_dir else manifest_path.parent
    tokens = [t.strip() for t in args.features.split(",") if t.strip()]
    if not tokens:
        raise ConfigError("--features must name at least one feature set")
    tables = _load_feature_tables(tokens, features_dir)
    modelling = _parse_modes(args.modelling, MODELLING_MODES, "modelling")
    norm = _parse_modes(args.norm, NORM_MODES, "normalisation")

    report = run_experiment(
        rows, tables, feature_sets=[t.split("=", 1)[0] for t in tokens],
        modelling_modes=modelling, norm_modes=norm, grid=TuningGrid(),
        seed=args.seed, n_boot=args.bootstrap,
        threads=args.threads or _threads_default(),
    )
    _write_text(args.out, report.to_json())
    log.info("wrote evaluation report to %s", args.out)
    if args.markdown:
        _write_text(args.markdown, report.to_markdown())
        log.info("wrote markdown table to %s", args.markdown)
    return EXIT_OK


def cmd_analyze(args) -> int:
    manifest_path = _require_file(args.manifest, "manifest")
    rows = load_manifest(manifest_path)
    features_dir = Path(args.features_dir) if args.features_dir else manifest_path.parent
    tables = _load_feature_tables([args.features.strip()], features_dir)
    (set_name, table), = tables.items()
    ds = join_dataset(rows, [table])

    scores = None
    if args.scores:
        scores_path = _require_file(args.scores, "scores file")
        scores = load_dimensional_scores(scores_path)
        missing = [k for k in ds.segment_keys if k not in scores.rows]
        if missing:
            raise DataError(f"{len(missing)} segment(s) missing from scores file")

    report = analyze_dataset(
        ds, seed=args.seed, modelling=args.modelling or "global",
        norm=args.norm or "global", rho_max=args.rho_max, top_k=args.top_k,
        scores=scores, threads=args.threads or _threads_default(),
    )
    report["features"] = set_name
    _write_json(args.out, report)
    log.info("wrote analysis report to %s", args.out)
    return EXIT_OK


# -- synth / report ---------------------------------------------------------

def cmd_synth(args) -> int:
    spec_path = _require_file(args.spec, "cohort spec")
    with open(spec_path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"cohort spec {spec_path}: invalid JSON ({exc})") from exc
    if args.seed is not None:
        raw["seed"] = args.seed
    if "seed" not in raw:
        raise ConfigError("cohort spec must set a seed (or pass --seed)")
    try:
        spec = CohortSpec.from_dict(raw)
    except TypeError as exc:
        raise ConfigError(f"cohort spec {spec_path}: {exc}") from exc
    emitted = generate(spec, args.out)
    for kind, path in sorted(emitted.items()):
        log.info("wrote %s: %s", kind, path)
    return EXIT_OK


def cmd_report(args) -> int:
    report_path = _require_file(args.report, "report JSON")
    with open(report_path, encoding="utf-8") as fh:
        try:
            report = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"report {report_path}: invalid JSON ({exc})") from exc
    if "cells" not in report:
        raise DataError(f"report {report_path}: missing 'cells'")
    _write_text(args.out, report_markdown(report))
    return EXIT_OK


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="voicerisk",
        description="Speech-based suicide-risk screening pipeline",
    )
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file; flags override its keys")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: $VOICERISK_THREADS or 1)")

    p = sub.add_parser("extract", help="compute GeMLite features for a manifest")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="output feature CSV")
    p.add_argument("--target-rms-db", type=float, default=None,
                   help=f"loudness target in dBFS (default {DEFAULT_TARGET_RMS_DB})")
    p.add_argument("--fallback-vad", action="store_true",
                   help="segment by energy when an alignment file is missing")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("evaluate", help="run the LOSO experiment grid")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", required=True,
                   help="comma list of feature sets (name or name=path)")
    p.add_argument("--features-dir", default=None,
                   help="directory holding <set>.csv files (default: manifest dir)")
    p.add_argument("--modelling", default=None,
                   help="all | comma list of global,lambda0,lambda0.1")
    p.add_argument("--norm", default=None, help="all | comma list of global,phrase")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--bootstrap", type=int, default=1000)
    p.add_argument("--out", required=True, help="output report JSON")
    p.add_argument("--markdown", default=None, help="also write a markdown table")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("analyze", help="feature ranking, U tests and group summaries")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", required=True, help="one feature set (name or name=path)")
    p.add_argument("--features-dir", default=None)
    p.add_argument("--scores", default=None, help="arousal/dominance/valence CSV")
    p.add_argument("--modelling", default=None, help="ranking config (default global)")
    p.add_argument("--norm", default=None, help="ranking config (default global)")
    p.add_argument("--rho-max", type=float, default=0.85)
    p.add_argument("--top-k", type=int, default=5)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output analysis JSON")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("synth", help="generate a synthetic cohort")
    common(p)
    p.add_argument("--spec", required=True, help="CohortSpec JSON")
    p.add_argument("--seed", type=int, default=None, help="override the spec seed")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="render a report JSON as markdown")
    common(p)
    p.add_argument("--report", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        _apply_config_file(args)
        return args.func(args)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except VoiceRiskError as exc:
        log.error("%s", exc)
        return EXIT_DATA
    except Exception:  # noqa: BLE001 - the CLI boundary reports and exits
        log.exception("internal error")
        return EXIT_INTERNAL


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
