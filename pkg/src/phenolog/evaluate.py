"""Cross-validation protocols, metrics, and the experiment runner.

Folds are grouped by participant: every row a person contributed (first
round and follow-up) lands on the same side of every split, removing the
within-person dependency between rounds. A greedy packer balances the
anxious-row count and total rows per fold. The ``no_group`` strategy
deliberately drops the constraint to expose the dependency effect, and
``significant_change_holdout`` pins every participant whose score moved
by 5 or more into the test side of all folds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import EvaluationError
from .features import FEATURE_NAMES, FeatureRow
from .ingest import ParticipantRecord
from .models import (
    AnxietyLabel,
    BoostingConfig,
    ForestConfig,
    GPConfig,
    TablePreprocessor,
    assemble_regression_matrix,
    label_anxiety,
    predict_proba,
    predict_regression,
    select_gp_config,
    train_gradient_boosting,
    train_logistic,
    train_ols,
    train_random_forest,
)
from .models.gp import gp_posterior_predict

SIGNIFICANT_CHANGE = 5
STRATEGIES = ("grouped", "holdout", "no-group")
CLASSIFY_MODELS = ("lr", "rf")
PREDICT_MODELS = ("ols", "gb", "gp")

HOLDOUT_FOLD = -1  # assignment sentinel: in every fold's test set


@dataclass(frozen=True)
class FoldPlan:
    """Participant-to-fold assignment; holdouts test in every fold."""

    k: int
    seed: int
    strategy: str
    assignments: Mapping[str, int]
    holdout_ids: frozenset[str] = frozenset()

    def train_ids(self, fold: int) -> list[str]:
        return sorted(
            pid
            for pid, f in self.assignments.items()
            if f != fold and f != HOLDOUT_FOLD
        )

    def test_ids(self, fold: int) -> list[str]:
        return sorted(
            pid for pid, f in self.assignments.items() if f == fold or f == HOLDOUT_FOLD
        )


def _group_label_counts(
    records: Sequence[ParticipantRecord],
) -> dict[str, tuple[int, int]]:
    """participant -> (anxious rows, total rows)."""
    out = {}
    for rec in records:
        scores = [rec.y1] + ([rec.y2] if rec.y2 is not None else [])
        anxious = sum(label_anxiety(s) is AnxietyLabel.ANXIOUS for s in scores)
        out[rec.participant_id] = (anxious, len(scores))
    return out


def make_folds(
    records: Sequence[ParticipantRecord],
    k: int = 5,
    seed: int = 0,
    strategy: str = "grouped",
) -> FoldPlan:
    """Greedy grouped-stratified fold assignment.

    ``holdout`` additionally pins every participant with a clinically
    significant score change (|y2 - y1| >= 5) into all test sets.
    """
    if k < 2:
        raise EvaluationError(f"need at least 2 folds, got {k}")
    if not records:
        raise EvaluationError("no participant records")
    if strategy not in ("grouped", "holdout"):
        raise EvaluationError(f"make_folds does not handle strategy {strategy!r}")

    counts = _group_label_counts(records)
    if len(counts) != len(records):
        raise EvaluationError("duplicate participant ids in records")

    holdout: set[str] = set()
    if strategy == "holdout":
        for rec in records:
            if rec.y2 is not None and abs(rec.y2 - rec.y1) >= SIGNIFICANT_CHANGE:
                holdout.add(rec.participant_id)

    pool = [pid for pid in counts if pid not in holdout]
    anxious_total = sum(counts[pid][0] for pid in pool)
    rows_total = sum(counts[pid][1] for pid in pool)
    if anxious_total == 0 or anxious_total == rows_total:
        raise EvaluationError("cannot stratify: a class is absent from the pool")
    if len(pool) < k:
        raise EvaluationError(f"only {len(pool)} assignable participants for {k} folds")

    rng = np.random.default_rng(seed)
    shuffled = [str(p) for p in rng.permutation(np.array(sorted(pool)))]
    # Most constrained first: heavy anxious groups, then large groups.
    order = sorted(
        shuffled, key=lambda pid: (-counts[pid][0], -counts[pid][1], shuffled.index(pid))
    )

    fold_anxious = np.zeros(k)
    fold_rows = np.zeros(k)
    assignments: dict[str, int] = {pid: HOLDOUT_FOLD for pid in holdout}
    for pid in order:
        anxious, rows = counts[pid]
        best: tuple | None = None
        for f in range(k):
            fold_anxious[f] += anxious
            fold_rows[f] += rows
            # Keep the class-count spread tight first, fold sizes second.
            score = (float(fold_anxious.std()), float(fold_rows.std()), f)
            fold_anxious[f] -= anxious
            fold_rows[f] -= rows
            if best is None or score < best[:3]:
                best = (*score,)
        fold = best[2]
        assignments[pid] = fold
        fold_anxious[fold] += anxious
        fold_rows[fold] += rows

    return FoldPlan(
        k=k,
        seed=seed,
        strategy=strategy,
        assignments=assignments,
        holdout_ids=frozenset(holdout),
    )


def tied_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties averaged."""
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(values.size, dtype=float)
    sorted_vals = values[order]
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def roc_auc(y_true: np.ndarray, y_prob: np.ndarray) -> float:
    """Tie-aware rank (Mann-Whitney) AUC."""
    y_true = np.asarray(y_true, dtype=int)
    y_prob = np.asarray(y_prob, dtype=float)
    n_pos = int(y_true.sum())
    n_neg = y_true.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise EvaluationError("AUC undefined: only one class present")
    ranks = tied_ranks(y_prob)
    return float((ranks[y_true == 1].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def roc_points(y_true: np.ndarray, y_prob: np.ndarray) -> list[tuple[float, float, float]]:
    """(threshold, fpr, tpr) staircase, thresholds descending."""
    y_true = np.asarray(y_true, dtype=int)
    y_prob = np.asarray(y_prob, dtype=float)
    n_pos = int(y_true.sum())
    n_neg = y_true.size - n_pos
    points = [(math.inf, 0.0, 0.0)]
    for thr in sorted(set(y_prob), reverse=True):
        pred = y_prob >= thr
        tp = int((pred & (y_true == 1)).sum())
        fp = int((pred & (y_true == 0)).sum())
        points.append((float(thr), fp / n_neg if n_neg else 0.0, tp / n_pos if n_pos else 0.0))
    return points


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def classification_metrics(
    y_true: Sequence[int],
    y_prob: Sequence[float],
    threshold: float = 0.5,
) -> dict[str, float]:
    """Per-class precision/recall/F1 (0/0 := 0), macro averages, AUC."""
    y_true = np.asarray(y_true, dtype=int)
    y_prob = np.asarray(y_prob, dtype=float)
    if y_true.size != y_prob.size:
        raise EvaluationError("labels and probabilities must align")
    if y_prob.size and (y_prob.min() < 0 or y_prob.max() > 1):
        raise EvaluationError("probabilities must lie in [0, 1]")
    y_pred = (y_prob >= threshold).astype(int)

    out: dict[str, float] = {"n": float(y_true.size)}
    per_class = []
    for cls, name in ((1, "anxious"), (0, "not_anxious")):
        tp = int(((y_pred == cls) & (y_true == cls)).sum())
        fp = int(((y_pred == cls) & (y_true != cls)).sum())
        fn = int(((y_pred != cls) & (y_true == cls)).sum())
        precision, recall, f1 = _prf(tp, fp, fn)
        out[f"precision_{name}"] = precision
        out[f"recall_{name}"] = recall
        out[f"f1_{name}"] = f1
        per_class.append((precision, recall, f1))
    out["precision_macro"] = float(np.mean([c[0] for c in per_class]))
    out["recall_macro"] = float(np.mean([c[1] for c in per_class]))
    out["f1_macro"] = float(np.mean([c[2] for c in per_class]))
    out["accuracy"] = float((y_pred == y_true).mean())
    out["auc"] = roc_auc(y_true, y_prob)
    return out


def regression_metrics(y_true: Sequence[float], y_pred: Sequence[float]) -> dict[str, float]:
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.size != y_pred.size or y_true.size == 0:
        raise EvaluationError("need equal nonempty prediction/target vectors")
    return {"n": float(y_true.size), "mse": float(((y_true - y_pred) ** 2).mean())}


@dataclass(frozen=True)
class ExperimentConfig:
    task: str = "classify"
    models: tuple[str, ...] = ()
    k: int = 5
    seed: int = 0
    strategy: str = "grouped"
    threshold: float = 0.5
    eta: float = 0.9
    l2: float = 0.01
    forest: ForestConfig = ForestConfig()
    boosting: BoostingConfig = BoostingConfig()
    gp: GPConfig = GPConfig()
    gp_grid_search: bool = False

    def resolved_models(self) -> tuple[str, ...]:
        if self.models:
            return self.models
        return CLASSIFY_MODELS if self.task == "classify" else PREDICT_MODELS


@dataclass
class MetricsReport:
    """Per-fold metrics for one model plus mean/std aggregates."""

    task: str
    model: str
    strategy: str
    seed: int
    k: int
    per_fold: list[dict[str, float]] = field(default_factory=list)

    def _numeric_keys(self) -> list[str]:
        return sorted({key for fold in self.per_fold for key in fold})

    def mean(self) -> dict[str, float]:
        return {
            key: float(np.mean([fold[key] for fold in self.per_fold]))
            for key in self._numeric_keys()
        }

    def std(self) -> dict[str, float]:
        return {
            key: float(np.std([fold[key] for fold in self.per_fold]))
            for key in self._numeric_keys()
        }

    def to_json(self) -> dict:
        return {
            "task": self.task,
            "model": self.model,
            "strategy": self.strategy,
            "seed": self.seed,
            "k": self.k,
            "per_fold": self.per_fold,
            "mean": self.mean(),
            "std": self.std(),
        }


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    reports: dict[str, MetricsReport]
    roc_curves: dict[str, list[list[tuple[float, float, float]]]] = field(default_factory=dict)
    predictions: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "task": self.config.task,
            "strategy": self.config.strategy,
            "seed": self.config.seed,
            "k": self.config.k,
            "models": {name: report.to_json() for name, report in self.reports.items()},
        }


def _fold_seed(seed: int, fold: int, salt: int) -> int:
    return int(np.random.SeedSequence([seed, fold, salt]).generate_state(1)[0])


@dataclass(frozen=True)
class _ClassifyRow:
    participant_id: str
    round: int
    x: np.ndarray
    label: int


def _classification_rows(
    records: Sequence[ParticipantRecord],
    feature_rows: Sequence[FeatureRow],
) -> list[_ClassifyRow]:
    table = {(r.participant_id, r.round): r.vector for r in feature_rows}
    rows: list[_ClassifyRow] = []
    for rec in records:
        for rnd, score in ((1, rec.y1), (2, rec.y2)):
            if score is None:
                continue
            if rnd == 2 and rec.round2_window is None:
                continue
            vector = table.get((rec.participant_id, rnd))
            if vector is None:
                raise EvaluationError(
                    f"missing features for participant {rec.participant_id} round {rnd}"
                )
            rows.append(
                _ClassifyRow(
                    participant_id=rec.participant_id,
                    round=rnd,
                    x=vector.as_array(),
                    label=int(label_anxiety(score) is AnxietyLabel.ANXIOUS),
                )
            )
    if not rows:
        raise EvaluationError("no classification rows available")
    return rows


def _no_group_assignment(labels: Sequence[int], k: int, seed: int) -> list[int]:
    """Row-level stratified folds, ignoring participant grouping."""
    rng = np.random.default_rng(seed)
    folds = [0] * len(labels)
    for cls in (0, 1):
        idx = [i for i, lab in enumerate(labels) if lab == cls]
        rng.shuffle(idx)
        for pos, i in enumerate(idx):
            folds[i] = pos % k
    return folds


def _run_classification(
    records: Sequence[ParticipantRecord],
    feature_rows: Sequence[FeatureRow],
    config: ExperimentConfig,
) -> ExperimentResult:
    rows = _classification_rows(records, feature_rows)
    labels = [r.label for r in rows]
    if config.strategy == "no-group":
        row_folds = _no_group_assignment(labels, config.k, config.seed)
        fold_masks = [
            (
                np.array([f != fold for f in row_folds]),
                np.array([f == fold for f in row_folds]),
            )
            for fold in range(config.k)
        ]
    elif config.strategy == "grouped":
        used = {r.participant_id for r in rows}
        plan = make_folds(
            [rec for rec in records if rec.participant_id in used],
            k=config.k,
            seed=config.seed,
            strategy="grouped",
        )
        fold_masks = []
        for fold in range(config.k):
            train = set(plan.train_ids(fold))
            test = set(plan.test_ids(fold))
            fold_masks.append(
                (
                    np.array([r.participant_id in train for r in rows]),
                    np.array([r.participant_id in test for r in rows]),
                )
            )
    else:
        raise EvaluationError(f"strategy {config.strategy!r} not valid for classification")

    x_all = np.array([r.x for r in rows])
    y_all = np.array(labels)
    models = config.resolved_models()
    for name in models:
        if name not in CLASSIFY_MODELS:
            raise EvaluationError(f"model {name!r} not valid for task classify")

    result = ExperimentResult(config=config, reports={}, roc_curves={})
    for salt, name in enumerate(models):
        report = MetricsReport(
            task="classify",
            model=name,
            strategy=config.strategy,
            seed=config.seed,
            k=config.k,
        )
        curves = []
        for fold, (train_mask, test_mask) in enumerate(fold_masks):
            seed_fold = _fold_seed(config.seed, fold, salt)
            x_tr, y_tr = x_all[train_mask], y_all[train_mask]
            x_te, y_te = x_all[test_mask], y_all[test_mask]
            if name == "lr":
                artifact = train_logistic(
                    x_tr, y_tr, l2=config.l2, seed=seed_fold, feature_names=FEATURE_NAMES
                )
            else:
                artifact = train_random_forest(
                    x_tr, y_tr, config=config.forest, seed=seed_fold, feature_names=FEATURE_NAMES
                )
            prob = predict_proba(artifact, x_te)
            metrics = classification_metrics(y_te, prob, threshold=config.threshold)
            metrics["fold"] = float(fold)
            report.per_fold.append(metrics)
            curves.append(roc_points(y_te, prob))
            for row, p in zip(np.array(rows, dtype=object)[test_mask], prob):
                result.predictions.append(
                    {
                        "model": name,
                        "fold": fold,
                        "participant_id": row.participant_id,
                        "round": row.round,
                        "y_true": int(row.label),
                        "y_prob": float(p),
                    }
                )
        result.reports[name] = report
        result.roc_curves[name] = curves
    return result


@dataclass(frozen=True)
class _PredictRow:
    participant_id: str
    x1: np.ndarray  # 9-feature subset, round 1
    x2: np.ndarray  # 9-feature subset, round 2
    y1: float
    y2: float


def _prediction_rows(
    records: Sequence[ParticipantRecord],
    feature_rows: Sequence[FeatureRow],
) -> list[_PredictRow]:
    table = {(r.participant_id, r.round): r.vector for r in feature_rows}
    rows = []
    for rec in records:
        if not rec.has_followup:
            continue
        v1 = table.get((rec.participant_id, 1))
        v2 = table.get((rec.participant_id, 2))
        if v1 is None or v2 is None:
            raise EvaluationError(
                f"missing round features for participant {rec.participant_id}"
            )
        rows.append(
            _PredictRow(
                participant_id=rec.participant_id,
                x1=v1.regression_subset(),
                x2=v2.regression_subset(),
                y1=float(rec.y1),
                y2=float(rec.y2),
            )
        )
    if not rows:
        raise EvaluationError("no participants with both rounds")
    return rows


def _run_prediction(
    records: Sequence[ParticipantRecord],
    feature_rows: Sequence[FeatureRow],
    config: ExperimentConfig,
) -> ExperimentResult:
    rows = _prediction_rows(records, feature_rows)
    by_id = {r.participant_id: r for r in rows}
    strategy = "holdout" if config.strategy == "holdout" else "grouped"
    plan = _prediction_folds(records, by_id, config.k, config.seed, strategy)

    models = config.resolved_models()
    for name in models:
        if name not in PREDICT_MODELS:
            raise EvaluationError(f"model {name!r} not valid for task predict")

    result = ExperimentResult(config=config, reports={})
    reports = {
        name: MetricsReport(
            task="predict", model=name, strategy=config.strategy, seed=config.seed, k=config.k
        )
        for name in models
    }

    for fold in range(config.k):
        train_ids = plan.train_ids(fold)
        test_ids = plan.test_ids(fold)
        train = [by_id[p] for p in train_ids]
        test = [by_id[p] for p in test_ids]
        if not train or not test:
            raise EvaluationError(f"fold {fold} has an empty split")

        # Impute+standardize the 9-feature space on training rounds only,
        # then weight: z-scoring after the eta weighting would undo it.
        prep = TablePreprocessor.fit(np.array([r.x1 for r in train] + [r.x2 for r in train]))
        z1_tr = prep.transform(np.array([r.x1 for r in train]))
        z2_tr = prep.transform(np.array([r.x2 for r in train]))
        z1_te = prep.transform(np.array([r.x1 for r in test]))
        z2_te = prep.transform(np.array([r.x2 for r in test]))
        y1_tr = np.array([r.y1 for r in train])
        y2_tr = np.array([r.y2 for r in train])
        y1_te = np.array([r.y1 for r in test])
        y2_te = np.array([r.y2 for r in test])

        xreg_tr = assemble_regression_matrix(z1_tr, z2_tr, y1_tr, config.eta)
        xreg_te = assemble_regression_matrix(z1_te, z2_te, y1_te, config.eta)
        xgp_tr, xgp_te = xreg_tr[:, :-1], xreg_te[:, :-1]

        fold_preds: dict[str, np.ndarray] = {}
        gp_stds: np.ndarray | None = None
        for salt, name in enumerate(models):
            seed_fold = _fold_seed(config.seed, fold, 100 + salt)
            if name == "ols":
                artifact = train_ols(xreg_tr, y2_tr, seed=seed_fold)
                pred = predict_regression(artifact, xreg_te)
            elif name == "gb":
                artifact = train_gradient_boosting(
                    xreg_tr, y2_tr, config=config.boosting, seed=seed_fold
                )
                pred = predict_regression(artifact, xreg_te)
            else:
                gp_config = config.gp
                if config.gp_grid_search:
                    gp_config = select_gp_config(xgp_tr, y1_tr, y2_tr, gp_config)
                posterior = gp_posterior_predict(
                    xgp_tr, y1_tr, y2_tr, xgp_te, y1_te, gp_config, seed_fold
                )
                pred = posterior.point_prediction
                gp_stds = posterior.std
                trace_mses = ((posterior.traces - y2_te[None, :]) ** 2).mean(axis=1)
            metrics = regression_metrics(y2_te, pred)
            metrics["fold"] = float(fold)
            if name == "gp":
                metrics["mse_trace_mean"] = float(trace_mses.mean())
            reports[name].per_fold.append(metrics)
            fold_preds[name] = pred

        for i, row in enumerate(test):
            entry = {
                "fold": fold,
                "participant_id": row.participant_id,
                "y1": row.y1,
                "y2_true": row.y2,
            }
            for name in models:
                entry[f"pred_{name}"] = float(fold_preds[name][i])
            if gp_stds is not None:
                entry["gp_std"] = float(gp_stds[i])
            result.predictions.append(entry)

    result.reports = reports
    return result


def _prediction_folds(
    records: Sequence[ParticipantRecord],
    by_id: Mapping[str, "_PredictRow"],
    k: int,
    seed: int,
    strategy: str,
) -> FoldPlan:
    eligible = [rec for rec in records if rec.participant_id in by_id]
    # Stratify the packer on the binarized follow-up score by presenting
    # y2 as the group's only labeled row.
    proxies = [
        ParticipantRecord(
            participant_id=rec.participant_id,
            round1_window=rec.round1_window,
            y1=int(rec.y2),
        )
        for rec in eligible
    ]
    if strategy == "grouped":
        return make_folds(proxies, k=k, seed=seed, strategy="grouped")

    holdout = {
        rec.participant_id
        for rec in eligible
        if abs(rec.y2 - rec.y1) >= SIGNIFICANT_CHANGE
    }
    pool = [p for p in proxies if p.participant_id not in holdout]
    base = make_folds(pool, k=k, seed=seed, strategy="grouped")
    assignments = dict(base.assignments)
    for pid in holdout:
        assignments[pid] = HOLDOUT_FOLD
    return FoldPlan(
        k=k,
        seed=seed,
        strategy="holdout",
        assignments=assignments,
        holdout_ids=frozenset(holdout),
    )


def run_experiment(
    records: Sequence[ParticipantRecord],
    feature_rows: Sequence[FeatureRow],
    config: ExperimentConfig,
) -> ExperimentResult:
    """Run the full cross-validated protocol for one task.

    ``classify`` pools every labeled round as an independent row;
    ``predict`` uses participants with both rounds and scores the
    follow-up estimate. Deterministic given identical inputs and seed.
    """
    if config.task == "classify":
        return _run_classification(records, feature_rows, config)
    if config.task == "predict":
        return _run_prediction(records, feature_rows, config)
    raise EvaluationError(f"unknown task {config.task!r}")
