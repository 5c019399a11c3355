"""Command-line surface: one binary, six subcommands.

ingest     raw event file -> per-participant timeline files + error report
featurize  timelines + survey records -> feature CSV
simulate   cohort spec -> synthetic events/records/ground truth
train      feature CSV + records -> model artifact JSON
predict    artifact + feature CSV [+ records] -> predictions CSV
evaluate   feature CSV + records -> metrics report, fold tables, figures

Exit codes: 0 success, 1 user/input error, 2 internal error. All
randomness flows from --seed; identical invocations write identical data
outputs. Files are written atomically (temp + rename).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import timedelta, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from . import features as feats
from .errors import PhenologError
from .evaluate import (
    ExperimentConfig,
    ExperimentResult,
    run_experiment,
)
from .ingest import (
    build_timeline,
    cut_window,
    load_records,
    parse_events,
    write_error_report,
    write_events_jsonl,
)
from .models import (
    BoostingConfig,
    ForestConfig,
    GPConfig,
    ModelArtifact,
    TablePreprocessor,
    assemble_regression_matrix,
    label_anxiety,
    predict_gp,
    predict_proba,
    predict_regression,
    train_gp,
    train_gradient_boosting,
    train_logistic,
    train_ols,
    train_random_forest,
)
from .models.preprocess import AnxietyLabel
from .synth import CohortSpec, generate_cohort, write_cohort
from .taxonomy import Lexicon

_OFFSET_RE = re.compile(r"^([+-])(\d{2}):(\d{2})$")


def _parse_offset(text: str) -> timezone:
    match = _OFFSET_RE.match(text.strip())
    if not match:
        raise PhenologError(f"--assume-offset must look like +HH:MM, got {text!r}")
    sign = 1 if match.group(1) == "+" else -1
    delta = timedelta(hours=int(match.group(2)), minutes=int(match.group(3)))
    return timezone(sign * delta)


def _parse_k_hours(text: str) -> tuple[float, float, float]:
    try:
        values = tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise PhenologError(f"--k-hours must be three comma-separated hours: {text!r}") from exc
    if len(values) != 3 or sorted(values) != list(values):
        raise PhenologError(f"--k-hours needs three ascending thresholds, got {text!r}")
    return values


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _atomic(path: Path, writer) -> None:
    """Run ``writer(tmp_path)`` then rename over ``path``."""
    tmp = path.with_name(path.name + ".tmp" + path.suffix)
    writer(tmp)
    os.replace(tmp, path)


def _safe_name(pid: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", pid)


def _maybe_show_config(args: argparse.Namespace) -> bool:
    if not getattr(args, "show_config", False):
        return False
    resolved = {
        key: value
        for key, value in sorted(vars(args).items())
        if key not in ("handler", "show_config")
    }
    print(json.dumps(resolved, indent=2, default=str))
    return True


# ----------------------------------------------------------------- ingest


def cmd_ingest(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    offset = _parse_offset(args.assume_offset) if args.assume_offset else None
    report = parse_events(args.input, format=args.format, assume_offset=offset)

    by_pid: dict[str, list] = {}
    for event in report.events:
        by_pid.setdefault(event.participant_id, []).append(event)

    for pid, events in sorted(by_pid.items()):
        timeline = build_timeline(events, pid)
        path = out_dir / f"{_safe_name(pid)}.jsonl"
        _atomic(path, lambda tmp, tl=timeline: write_events_jsonl(tl.events, tmp))
    _atomic(out_dir / "errors.jsonl", lambda tmp: write_error_report(report.errors, tmp))

    print(
        f"ingested {len(report.events)} events from {len(by_pid)} participants; "
        f"{report.n_malformed} malformed line(s) -> {out_dir / 'errors.jsonl'}"
    )
    return 0


# -------------------------------------------------------------- featurize


def _events_by_participant(input_path: Path, pids: list[str], offset) -> dict[str, list]:
    """Events per participant, parsing each input file exactly once."""
    grouped: dict[str, list] = {pid: [] for pid in pids}
    if input_path.is_dir():
        for pid in pids:
            path = input_path / f"{_safe_name(pid)}.jsonl"
            if not path.exists():
                raise PhenologError(f"no timeline file for participant {pid}: {path}")
            grouped[pid] = parse_events(path, format="jsonl", assume_offset=offset).events
    else:
        for event in parse_events(input_path, format="jsonl", assume_offset=offset).events:
            if event.participant_id in grouped:
                grouped[event.participant_id].append(event)
    empty = [pid for pid, events in grouped.items() if not events]
    if empty:
        raise PhenologError(f"no events for participant(s): {', '.join(empty[:5])}")
    return grouped


def _featurize_one(task: tuple) -> tuple[str, int, list[float]]:
    pid, rnd, timeline, labeler, lexicon_json, thresholds = task
    lexicon = Lexicon(**lexicon_json) if lexicon_json else None
    from .taxonomy import label_timeline

    labels = label_timeline(timeline, labeler=labeler, lexicon=lexicon)
    vector = feats.extract_features(timeline, labels, inactivity_thresholds=thresholds)
    return pid, rnd, vector.as_array().tolist()


def cmd_featurize(args: argparse.Namespace) -> int:
    records = load_records(args.records)
    thresholds = _parse_k_hours(args.k_hours)
    lexicon_json = None
    if args.labeler == "lexicon":
        if not args.lexicon:
            raise PhenologError("--labeler lexicon requires --lexicon PATH")
        lex = Lexicon.from_file(args.lexicon)
        lexicon_json = {"entries": lex.entries, "default_category": lex.default_category}

    offset = _parse_offset(args.assume_offset) if args.assume_offset else None
    grouped = _events_by_participant(
        Path(args.input), [rec.participant_id for rec in records], offset
    )

    tasks = []
    for rec in records:
        base = build_timeline(grouped[rec.participant_id], rec.participant_id)
        windows = [(1, rec.round1_window)]
        if rec.round2_window is not None:
            windows.append((2, rec.round2_window))
        for rnd, window in windows:
            timeline = cut_window(base, window[0], window[1])
            tasks.append(
                (rec.participant_id, rnd, timeline, args.labeler, lexicon_json, thresholds)
            )

    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_featurize_one, tasks))
    else:
        results = [_featurize_one(t) for t in tasks]

    rows = [
        feats.FeatureRow(pid, rnd, feats.FeatureVector.from_array(values))
        for pid, rnd, values in sorted(results, key=lambda r: (r[0], r[1]))
    ]
    out = Path(args.out)
    _atomic(out, lambda tmp: feats.write_feature_csv(rows, tmp))
    print(f"wrote {len(rows)} feature rows -> {out}")
    return 0


# --------------------------------------------------------------- simulate


def cmd_simulate(args: argparse.Namespace) -> int:
    if args.spec:
        spec = CohortSpec.load(args.spec)
        if args.seed is not None:
            spec = CohortSpec.from_json({**spec.to_json(), "seed": args.seed})
    else:
        spec = CohortSpec(seed=args.seed if args.seed is not None else 0)
    cohort = generate_cohort(spec)
    paths = write_cohort(cohort, args.out)
    print(
        f"simulated {len(cohort.records)} participants, {len(cohort.events)} events -> "
        f"{paths['events'].parent}"
    )
    return 0


# ------------------------------------------------------------------ train


def _classification_design(records, feature_rows):
    table = {(r.participant_id, r.round): r.vector for r in feature_rows}
    xs, ys = [], []
    for rec in records:
        for rnd, score in ((1, rec.y1), (2, rec.y2)):
            if score is None or (rnd == 2 and rec.round2_window is None):
                continue
            vector = table.get((rec.participant_id, rnd))
            if vector is None:
                raise PhenologError(
                    f"missing features for participant {rec.participant_id} round {rnd}"
                )
            xs.append(vector.as_array())
            ys.append(int(label_anxiety(score) is AnxietyLabel.ANXIOUS))
    return np.array(xs), np.array(ys)


def _regression_design(records, feature_rows, eta):
    table = {(r.participant_id, r.round): r.vector for r in feature_rows}
    pids, x1, x2, y1, y2 = [], [], [], [], []
    for rec in records:
        if not rec.has_followup:
            continue
        v1, v2 = table.get((rec.participant_id, 1)), table.get((rec.participant_id, 2))
        if v1 is None or v2 is None:
            raise PhenologError(f"missing round features for {rec.participant_id}")
        pids.append(rec.participant_id)
        x1.append(v1.regression_subset())
        x2.append(v2.regression_subset())
        y1.append(float(rec.y1))
        y2.append(float(rec.y2))
    if not pids:
        raise PhenologError("no participants with both rounds")
    prep = TablePreprocessor.fit(np.array(x1 + x2))
    z1 = prep.transform(np.array(x1))
    z2 = prep.transform(np.array(x2))
    xreg = assemble_regression_matrix(z1, z2, np.array(y1), eta)
    return pids, xreg, np.array(y1), np.array(y2), prep


def _gp_config_from_args(args) -> GPConfig:
    return GPConfig(
        length_scale=args.gp_lengthscale,
        noise_std=args.gp_noise,
        n_traces=args.traces,
    )


def cmd_train(args: argparse.Namespace) -> int:
    records = load_records(args.records)
    feature_rows = feats.read_feature_csv(args.features)
    seed = args.seed if args.seed is not None else 0

    if args.task == "classify":
        if args.model not in ("lr", "rf"):
            raise PhenologError(f"model {args.model!r} is not a classifier")
        x, y = _classification_design(records, feature_rows)
        if args.model == "lr":
            artifact = train_logistic(x, y, l2=args.l2, seed=seed, feature_names=feats.FEATURE_NAMES)
        else:
            artifact = train_random_forest(
                x, y, config=ForestConfig(), seed=seed, feature_names=feats.FEATURE_NAMES
            )
    else:
        if args.model not in ("ols", "gb", "gp"):
            raise PhenologError(f"model {args.model!r} is not a regressor")
        _, xreg, y1, y2, prep = _regression_design(records, feature_rows, args.eta)
        names = tuple(
            [f"eta_x2:{n}" for n in feats.REGRESSION_FEATURE_NAMES]
            + [f"shift:{n}" for n in feats.REGRESSION_FEATURE_NAMES]
            + ["y1"]
        )
        if args.model == "ols":
            artifact = train_ols(xreg, y2, feature_names=names, seed=seed)
        elif args.model == "gb":
            artifact = train_gradient_boosting(
                xreg, y2, config=BoostingConfig(), seed=seed, feature_names=names
            )
        else:
            artifact = train_gp(
                xreg[:, :-1], y1, y2, config=_gp_config_from_args(args), seed=seed,
                feature_names=names[:-1],
            )
        artifact.extra = {
            "pipeline": {
                "eta": args.eta,
                "preprocess9": prep.to_json(),
                "regression_features": list(feats.REGRESSION_FEATURE_NAMES),
            }
        }

    out = Path(args.out)
    _atomic(out, lambda tmp: artifact.save(tmp))
    print(f"trained {artifact.kind} on {len(feature_rows)} feature rows -> {out}")
    return 0


# ---------------------------------------------------------------- predict


def cmd_predict(args: argparse.Namespace) -> int:
    artifact = ModelArtifact.load(args.artifact)
    feature_rows = feats.read_feature_csv(args.features)
    out = Path(args.out)

    if artifact.kind in ("lr", "rf"):
        artifact.check_features(feats.FEATURE_NAMES)
        rows = sorted(feature_rows, key=lambda r: (r.participant_id, r.round))
        x = np.array([r.vector.as_array() for r in rows])
        prob = predict_proba(artifact, x)

        def _write(tmp: Path) -> None:
            with tmp.open("w", encoding="utf-8", newline="") as handle:
                writer = csv.writer(handle)
                writer.writerow(["participant_id", "round", "prob_anxious", "label"])
                for row, p in zip(rows, prob):
                    label = "Anxious" if p >= args.threshold else "NotAnxious"
                    writer.writerow([row.participant_id, row.round, repr(float(p)), label])

        _atomic(out, _write)
        print(f"wrote {len(rows)} class predictions -> {out}")
        return 0

    # Regression artifacts carry their own 9-feature pipeline state.
    pipeline = artifact.extra.get("pipeline")
    if not pipeline:
        raise PhenologError("regression artifact lacks pipeline state")
    if tuple(pipeline["regression_features"]) != feats.REGRESSION_FEATURE_NAMES:
        raise PhenologError("feature order mismatch")
    if not args.records:
        raise PhenologError("regression prediction requires --records (previous scores)")
    records = load_records(args.records)
    table = {(r.participant_id, r.round): r.vector for r in feature_rows}
    prep = TablePreprocessor.from_json(pipeline["preprocess9"])
    eta = float(pipeline["eta"])

    pids, z1, z2, y1 = [], [], [], []
    for rec in records:
        v1, v2 = table.get((rec.participant_id, 1)), table.get((rec.participant_id, 2))
        if v1 is None or v2 is None:
            continue
        pids.append(rec.participant_id)
        z1.append(prep.transform(v1.regression_subset()[None, :])[0])
        z2.append(prep.transform(v2.regression_subset()[None, :])[0])
        y1.append(float(rec.y1))
    if not pids:
        raise PhenologError("no participants with both feature rounds")
    xreg = assemble_regression_matrix(np.array(z1), np.array(z2), np.array(y1), eta)

    if artifact.kind == "gp":
        posterior = predict_gp(artifact, xreg[:, :-1], np.array(y1), seed=args.seed)
        estimates, stds = posterior.point_prediction, posterior.std
    else:
        estimates = predict_regression(artifact, xreg)
        stds = None

    def _write(tmp: Path) -> None:
        with tmp.open("w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            header = ["participant_id", "y1", "estimate"]
            if stds is not None:
                header.append("std")
            writer.writerow(header)
            for i, pid in enumerate(pids):
                row = [pid, y1[i], repr(float(estimates[i]))]
                if stds is not None:
                    row.append(repr(float(stds[i])))
                writer.writerow(row)

    _atomic(out, _write)
    print(f"wrote {len(pids)} score predictions -> {out}")
    return 0


# --------------------------------------------------------------- evaluate


def _write_fold_csv(result: ExperimentResult, path: Path) -> None:
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["model", "fold", "metric", "value"])
        for name, report in result.reports.items():
            for fold_metrics in report.per_fold:
                fold = int(fold_metrics["fold"])
                for key in sorted(fold_metrics):
                    if key == "fold":
                        continue
                    writer.writerow([name, fold, key, repr(float(fold_metrics[key]))])


def _write_roc_tsv(result: ExperimentResult, path: Path) -> None:
    with path.open("w", encoding="utf-8") as handle:
        handle.write("model\tfold\tthreshold\tfpr\ttpr\n")
        for name, curves in result.roc_curves.items():
            for fold, curve in enumerate(curves):
                for threshold, fpr, tpr in curve:
                    thr = "inf" if math.isinf(threshold) else repr(threshold)
                    handle.write(f"{name}\t{fold}\t{thr}\t{fpr!r}\t{tpr!r}\n")


def _write_predictions_csv(result: ExperimentResult, path: Path) -> None:
    if not result.predictions:
        return
    keys = list(result.predictions[0].keys())
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(keys)
        for row in result.predictions:
            writer.writerow([row.get(k, "") for k in keys])


def cmd_evaluate(args: argparse.Namespace) -> int:
    records = load_records(args.records)
    feature_rows = feats.read_feature_csv(args.features)
    models: tuple[str, ...] = ()
    if args.model != "all":
        models = (args.model,)
    config = ExperimentConfig(
        task=args.task,
        models=models,
        k=args.folds,
        seed=args.seed if args.seed is not None else 0,
        strategy=args.strategy,
        threshold=args.threshold,
        eta=args.eta,
        l2=args.l2,
        gp=_gp_config_from_args(args),
        gp_grid_search=args.gp_grid_search,
    )
    result = run_experiment(records, feature_rows, config)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _atomic_write_text(out_dir / "report.json", json.dumps(result.to_json(), indent=2) + "\n")
    _atomic(out_dir / "folds.csv", lambda tmp: _write_fold_csv(result, tmp))
    if result.roc_curves:
        _atomic(out_dir / "roc.tsv", lambda tmp: _write_roc_tsv(result, tmp))
    if result.predictions:
        _atomic(out_dir / "predictions.csv", lambda tmp: _write_predictions_csv(result, tmp))
    if not args.no_figures:
        from .plots import render_result_figures

        render_result_figures(result, out_dir)

    for name, report in result.reports.items():
        mean, std = report.mean(), report.std()
        if args.task == "classify":
            print(
                f"{name}: F1(anxious) {mean['f1_anxious']:.3f} ± {std['f1_anxious']:.3f}, "
                f"AUC {mean['auc']:.3f} ± {std['auc']:.3f}"
            )
        else:
            print(f"{name}: MSE {mean['mse']:.3f} ± {std['mse']:.3f}")
    print(f"report -> {out_dir / 'report.json'}")
    return 0


# ------------------------------------------------------------------- main


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="deterministic RNG seed")
    parser.add_argument(
        "--show-config", action="store_true", help="print the resolved options and exit"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phenolog",
        description="Behavioral features and anxiety models from online-activity logs",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("ingest", help="parse raw events into per-participant timelines")
    p.add_argument("--input", required=True, help="raw events file (JSONL or CSV)")
    p.add_argument("--out", required=True, help="output directory for timeline files")
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p.add_argument("--assume-offset", default=None, help="offset (+HH:MM) for naive timestamps")
    _add_common(p)
    p.set_defaults(handler=cmd_ingest)

    p = sub.add_parser("featurize", help="compute the 16-feature table per (participant, round)")
    p.add_argument("--input", required=True, help="timeline directory or single events JSONL")
    p.add_argument("--records", required=True, help="participant records JSON")
    p.add_argument("--out", required=True, help="output feature CSV")
    p.add_argument("--labeler", choices=("passthrough", "lexicon"), default="passthrough")
    p.add_argument("--lexicon", default=None, help="lexicon JSON (for --labeler lexicon)")
    p.add_argument("--k-hours", default="8,9,10", help="inactivity thresholds, hours")
    p.add_argument("--assume-offset", default=None)
    p.add_argument("--jobs", type=int, default=1, help="parallel workers per participant")
    _add_common(p)
    p.set_defaults(handler=cmd_featurize)

    p = sub.add_parser("simulate", help="generate a synthetic cohort with planted truth")
    p.add_argument("--spec", default=None, help="cohort spec JSON (defaults when omitted)")
    p.add_argument("--out", required=True, help="output directory")
    _add_common(p)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("train", help="train one model on the full table")
    p.add_argument("--features", required=True)
    p.add_argument("--records", required=True)
    p.add_argument("--task", choices=("classify", "predict"), required=True)
    p.add_argument("--model", choices=("lr", "rf", "ols", "gb", "gp"), required=True)
    p.add_argument("--out", required=True, help="artifact JSON path")
    p.add_argument("--eta", type=float, default=0.9)
    p.add_argument("--l2", type=float, default=0.01)
    p.add_argument("--gp-lengthscale", type=float, default=None)
    p.add_argument("--gp-noise", type=float, default=1.0)
    p.add_argument("--traces", type=int, default=100)
    _add_common(p)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("predict", help="apply a saved artifact to a feature table")
    p.add_argument("--artifact", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--records", default=None, help="records JSON (required for regression)")
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    _add_common(p)
    p.set_defaults(handler=cmd_predict)

    p = sub.add_parser("evaluate", help="cross-validated evaluation with report + figures")
    p.add_argument("--features", required=True)
    p.add_argument("--records", required=True)
    p.add_argument("--task", choices=("classify", "predict"), required=True)
    p.add_argument("--model", choices=("lr", "rf", "ols", "gb", "gp", "all"), default="all")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--strategy", choices=("grouped", "holdout", "no-group"), default="grouped")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--eta", type=float, default=0.9)
    p.add_argument("--l2", type=float, default=0.01)
    p.add_argument("--gp-lengthscale", type=float, default=None)
    p.add_argument("--gp-noise", type=float, default=1.0)
    p.add_argument("--traces", type=int, default=100)
    p.add_argument("--gp-grid-search", action="store_true")
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--out", required=True, help="report output directory")
    _add_common(p)
    p.set_defaults(handler=cmd_evaluate)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "handler", None) is None:
        parser.print_help()
        return 0
    if _maybe_show_config(args):
        return 0
    try:
        return args.handler(args)
    except PhenologError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FileNotFoundError, NotADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON input ({exc})", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - internal failure guard
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
