"""Synthetic cohorts with planted ground truth.

Event streams come from the self-exciting simulator with nightly sleep
windows suppressed during simulation (a suppressed arrival never happens,
so it spawns no offspring and the post-sleep intensity relaxes to the
background rate; this reproduces the early-morning gap-midpoint geometry
the inactivity features measure). Scores come from a planted rule over
the same features the extraction pipeline computes, so the whole loop
closes: simulate, featurize, model, and the planted signal is
recoverable.

Per-participant randomness derives from ``SeedSequence([seed, index])``;
identical specs produce byte-identical event files.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from datetime import timedelta
from pathlib import Path
from typing import Sequence

import numpy as np

from . import features as feats
from .errors import FeatureError
from .hawkes import HawkesParams, simulate_with_blackouts
from .ingest import (
    ActivityEvent,
    ActivityTimeline,
    ParticipantRecord,
    build_timeline,
    cut_window,
    parse_timestamp,
)
from .taxonomy import CategoryLabel

DEFAULT_CATEGORIES = (
    "Arts", "News", "Sports", "Science", "Games", "Music", "Food", "Travel",
)
DEFAULT_START = "2019-08-05T00:00:00-04:00"  # a Monday, local midnight


@dataclass(frozen=True)
class HawkesRanges:
    """Uniform draw ranges for per-participant process parameters."""

    gamma: tuple[float, float] = (0.4, 0.8)
    alpha: tuple[float, float] = (0.4, 0.7)
    beta: tuple[float, float] = (0.8, 1.6)


@dataclass(frozen=True)
class SleepSpec:
    """Nightly inactivity carved out of the stream, local wall clock."""

    start_hour: float = 23.0
    duration_hours: float = 8.0
    start_jitter_std: float = 0.0
    duration_jitter_std: float = 0.0

    def __post_init__(self) -> None:
        if not 0 < self.duration_hours < 24:
            raise ValueError("sleep duration must be in (0, 24) hours")
        if not 0 <= self.start_hour < 24:
            raise ValueError("sleep start hour must be in [0, 24)")


@dataclass(frozen=True)
class LabelRule:
    """Planted mapping from features to a GAD-7 score.

    ``linear``: bias + sum(weights[name] * feature) + N(0, noise_std),
    rounded and clipped to [0, 21]. ``threshold``: ``high`` when the named
    feature exceeds the cutoff else ``low``; a cutoff of None means the
    cohort median of round-1 values.
    """

    kind: str = "linear"
    weights: dict[str, float] = field(default_factory=dict)
    bias: float = 8.0
    noise_std: float = 0.0
    feature: str = "cat_entropy_total"
    cutoff: float | None = None
    low: int = 4
    high: int = 15

    def __post_init__(self) -> None:
        if self.kind not in ("linear", "threshold"):
            raise ValueError(f"unknown label rule kind {self.kind!r}")
        for name in list(self.weights) + ([self.feature] if self.kind == "threshold" else []):
            if name not in feats.FEATURE_NAMES:
                raise ValueError(f"unknown feature in label rule: {name!r}")


@dataclass(frozen=True)
class FollowUpSpec:
    """How the second round drifts away from the first.

    ``linked`` scores follow y2 = y1 + sum(drift_weights * (x1 - x2)) +
    noise; ``independent`` reapplies the label rule to round-2 features.
    """

    mode: str = "linked"
    hawkes_drift_std: float = 0.10
    category_drift: float = 0.25
    drift_weights: dict[str, float] = field(default_factory=dict)
    noise_std: float = 1.0

    def __post_init__(self) -> None:
        if self.mode not in ("linked", "independent"):
            raise ValueError(f"unknown follow-up mode {self.mode!r}")
        for name in self.drift_weights:
            if name not in feats.FEATURE_NAMES:
                raise ValueError(f"unknown feature in drift weights: {name!r}")


@dataclass(frozen=True)
class CohortSpec:
    n_participants: int = 50
    seed: int = 0
    round1_days: int = 28
    round2_days: int = 21
    start: str = DEFAULT_START
    hawkes: HawkesRanges = HawkesRanges()
    categories: tuple[str, ...] = DEFAULT_CATEGORIES
    # Bimodal concentrations spread the entropy features, and the default
    # threshold rule splits the cohort at their median: a bare spec yields
    # both classes and a usable two-round cohort out of the box.
    dirichlet_alphas: tuple[float, ...] = (0.3, 2.0)
    p_search: float = 0.5
    sleep: SleepSpec | None = SleepSpec()
    label_rule: LabelRule = LabelRule(kind="threshold", feature="cat_entropy_total")
    follow_up: FollowUpSpec | None = FollowUpSpec()
    n_significant_change: int = 0

    def __post_init__(self) -> None:
        if self.n_participants < 1:
            raise ValueError("need at least one participant")
        if self.round1_days < feats.MIN_SPAN_DAYS or (
            self.follow_up is not None and self.round2_days < feats.MIN_SPAN_DAYS
        ):
            raise ValueError(f"round windows must span >= {feats.MIN_SPAN_DAYS} days")
        if not self.categories:
            raise ValueError("need at least one category")
        if self.n_significant_change and self.follow_up is None:
            raise ValueError("significant changes require a follow-up round")
        if self.n_significant_change > self.n_participants:
            raise ValueError("more significant-change participants than participants")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "CohortSpec":
        data = dict(data)
        if "hawkes" in data:
            data["hawkes"] = HawkesRanges(
                **{k: tuple(v) for k, v in data["hawkes"].items()}
            )
        if data.get("sleep") is not None:
            data["sleep"] = SleepSpec(**data["sleep"])
        if "label_rule" in data:
            data["label_rule"] = LabelRule(**data["label_rule"])
        if data.get("follow_up") is not None:
            data["follow_up"] = FollowUpSpec(**data["follow_up"])
        if "categories" in data:
            data["categories"] = tuple(data["categories"])
        if "dirichlet_alphas" in data:
            data["dirichlet_alphas"] = tuple(data["dirichlet_alphas"])
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> "CohortSpec":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class SyntheticCohort:
    spec: CohortSpec
    events: list[ActivityEvent]
    records: list[ParticipantRecord]
    timelines: dict[tuple[str, int], ActivityTimeline]
    ground_truth: dict


def _sleep_intervals(
    sleep: SleepSpec, total_hours: float, base_hour: float, rng: np.random.Generator
) -> np.ndarray:
    """Flattened [start0, end0, start1, end1, ...] suppression bounds."""
    bounds: list[float] = []
    night = -1
    while True:
        start = night * 24.0 + (sleep.start_hour - base_hour)
        duration = sleep.duration_hours
        if sleep.start_jitter_std > 0:
            start += rng.normal(0.0, sleep.start_jitter_std)
        if sleep.duration_jitter_std > 0:
            duration = max(0.5, duration + rng.normal(0.0, sleep.duration_jitter_std))
        end = start + duration
        if start > total_hours:
            break
        if end > 0:
            bounds.extend([max(start, 0.0), min(end, total_hours)])
        night += 1
    return np.array(bounds)


def _make_gate(bounds: np.ndarray):
    if bounds.size == 0:
        return None

    def gate(t: float) -> bool:
        return bool(np.searchsorted(bounds, t, side="right") % 2 == 1)

    return gate


_RULE_COMPONENTS = {
    "activity": feats.FEATURE_NAMES[0:4],
    "cat_entropy": feats.FEATURE_NAMES[4:7],
    "time_entropy": feats.FEATURE_NAMES[7:10],
    "hawkes": feats.FEATURE_NAMES[10:13],
    "inactivity": feats.FEATURE_NAMES[13:16],
}


def _needed_components(names: set[str]) -> set[str]:
    return {comp for comp, members in _RULE_COMPONENTS.items() if names & set(members)}


def _partial_features(
    timeline: ActivityTimeline,
    labels: Sequence[CategoryLabel],
    names: set[str],
) -> dict[str, float]:
    """Only the feature entries a planted rule references (fits are costly)."""
    values: dict[str, float] = {}
    comps = _needed_components(names)
    if "activity" in comps:
        dm, dv, wm, wv = feats.activity_stats(timeline)
        values.update(
            daily_mean_log=dm, daily_var_log=dv, weekly_mean_log=wm, weekly_var_log=wv
        )
    if "cat_entropy" in comps:
        for f in feats.DAY_FILTERS:
            values[f"cat_entropy_{f}"] = feats.category_entropy(timeline, labels, f)
    if "time_entropy" in comps:
        for f in feats.DAY_FILTERS:
            values[f"time_entropy_{f}"] = feats.time_entropy(timeline, f)
    if "hawkes" in comps:
        fit = feats.fit_hawkes_features(timeline)
        values.update(
            hawkes_gamma=fit.params.gamma,
            hawkes_alpha=fit.params.alpha,
            hawkes_beta=fit.params.beta,
        )
    if "inactivity" in comps:
        for k, name in zip(feats.INACTIVITY_THRESHOLDS, _RULE_COMPONENTS["inactivity"]):
            try:
                values[name] = feats.inactivity_mode(timeline, k)
            except FeatureError:
                values[name] = 0.0  # absent gap contributes nothing to the rule
    return values


def _clip_score(value: float) -> int:
    return int(min(21, max(0, round(value))))


@dataclass
class _Draw:
    """Everything sampled for one participant before scoring."""

    pid: str
    params1: HawkesParams
    params2: HawkesParams | None
    probs1: np.ndarray
    probs2: np.ndarray | None
    events1: list[ActivityEvent]
    events2: list[ActivityEvent]
    rng: np.random.Generator


def _draw_params(rng: np.random.Generator, ranges: HawkesRanges) -> HawkesParams:
    return HawkesParams(
        gamma=float(rng.uniform(*ranges.gamma)),
        alpha=float(rng.uniform(*ranges.alpha)),
        beta=float(rng.uniform(*ranges.beta)),
    )


def _drift_params(
    rng: np.random.Generator, params: HawkesParams, rel_std: float
) -> HawkesParams:
    if rel_std <= 0:
        return params
    factors = np.exp(rng.normal(0.0, rel_std, size=3))
    return HawkesParams(
        gamma=float(params.gamma * factors[0]),
        alpha=float(min(0.95, params.alpha * factors[1])),
        beta=float(params.beta * factors[2]),
    )


def _events_for_window(
    spec: CohortSpec,
    pid: str,
    params: HawkesParams,
    probs: np.ndarray,
    window_start,
    days: int,
    rng: np.random.Generator,
) -> list[ActivityEvent]:
    total_hours = days * 24.0
    base_hour = window_start.hour + window_start.minute / 60.0 + window_start.second / 3600.0
    gate = None
    if spec.sleep is not None:
        gate = _make_gate(_sleep_intervals(spec.sleep, total_hours, base_hour, rng))
    times = simulate_with_blackouts(params, total_hours, rng, blackout=gate)

    n = times.size
    is_search = rng.random(n) < spec.p_search
    cat_idx = rng.choice(len(spec.categories), size=n, p=probs)
    events = []
    for i in range(n):
        seconds = int(times[i] * 3600.0)
        category = spec.categories[int(cat_idx[i])]
        token = category.lower()
        if is_search[i]:
            source, action, text = "search", "query", f"{token} query {i:05d}"
        else:
            source, action, text = "youtube", "watch", f"{token} clip {i:05d}"
        events.append(
            ActivityEvent(
                participant_id=pid,
                timestamp=window_start + timedelta(seconds=seconds),
                source=source,
                action=action,
                category=category,
                text=text,
            )
        )
    return events


def generate_cohort(spec: CohortSpec) -> SyntheticCohort:
    """Generate timelines, records, and the ground-truth sidecar."""
    start1 = parse_timestamp(spec.start)
    end1 = start1 + timedelta(days=spec.round1_days)
    end2 = end1 + timedelta(days=spec.round2_days)

    rule_names = set(spec.label_rule.weights)
    if spec.label_rule.kind == "threshold":
        rule_names.add(spec.label_rule.feature)
    drift_names = set(spec.follow_up.drift_weights) if spec.follow_up else set()

    draws: list[_Draw] = []
    for i in range(spec.n_participants):
        rng = np.random.default_rng(np.random.SeedSequence([spec.seed, i]))
        pid = f"p{i:03d}"
        params1 = _draw_params(rng, spec.hawkes)
        alpha_cat = float(rng.choice(np.array(spec.dirichlet_alphas)))
        probs1 = rng.dirichlet(np.full(len(spec.categories), alpha_cat))
        events1 = _events_for_window(spec, pid, params1, probs1, start1, spec.round1_days, rng)

        params2 = probs2 = None
        events2: list[ActivityEvent] = []
        if spec.follow_up is not None:
            params2 = _drift_params(rng, params1, spec.follow_up.hawkes_drift_std)
            blend = spec.follow_up.category_drift
            fresh = rng.dirichlet(np.full(len(spec.categories), alpha_cat))
            probs2 = (1.0 - blend) * probs1 + blend * fresh
            probs2 = probs2 / probs2.sum()
            events2 = _events_for_window(
                spec, pid, params2, probs2, end1, spec.round2_days, rng
            )
        draws.append(_Draw(pid, params1, params2, probs1, probs2, events1, events2, rng))

    timelines: dict[tuple[str, int], ActivityTimeline] = {}
    feature_values: dict[tuple[str, int], dict[str, float]] = {}
    needed = rule_names | drift_names
    for draw in draws:
        tl1 = cut_window(build_timeline(draw.events1, draw.pid), start1, end1)
        timelines[(draw.pid, 1)] = tl1
        labels1 = [CategoryLabel(root=e.category) for e in tl1.events]
        feature_values[(draw.pid, 1)] = _partial_features(tl1, labels1, needed)
        if spec.follow_up is not None:
            tl2 = cut_window(build_timeline(draw.events2, draw.pid), end1, end2)
            timelines[(draw.pid, 2)] = tl2
            labels2 = [CategoryLabel(root=e.category) for e in tl2.events]
            feature_values[(draw.pid, 2)] = _partial_features(tl2, labels2, needed)

    cutoff = spec.label_rule.cutoff
    if spec.label_rule.kind == "threshold" and cutoff is None:
        cutoff = float(
            np.median(
                [feature_values[(d.pid, 1)][spec.label_rule.feature] for d in draws]
            )
        )

    def apply_rule(values: dict[str, float], rng: np.random.Generator) -> int:
        rule = spec.label_rule
        if rule.kind == "threshold":
            return rule.high if values[rule.feature] > cutoff else rule.low
        raw = rule.bias + sum(w * values[name] for name, w in rule.weights.items())
        if rule.noise_std > 0:
            raw += rng.normal(0.0, rule.noise_std)
        return _clip_score(raw)

    records: list[ParticipantRecord] = []
    truth_rows: list[dict] = []
    significant_ids = {d.pid for d in draws[: spec.n_significant_change]}
    for draw in draws:
        y1 = apply_rule(feature_values[(draw.pid, 1)], draw.rng)
        y2 = None
        if spec.follow_up is not None:
            if spec.follow_up.mode == "independent":
                y2 = apply_rule(feature_values[(draw.pid, 2)], draw.rng)
            else:
                delta = sum(
                    w
                    * (
                        feature_values[(draw.pid, 1)][name]
                        - feature_values[(draw.pid, 2)][name]
                    )
                    for name, w in spec.follow_up.drift_weights.items()
                )
                raw = y1 + delta
                if spec.follow_up.noise_std > 0:
                    raw += draw.rng.normal(0.0, spec.follow_up.noise_std)
                y2 = _clip_score(raw)
            if draw.pid in significant_ids and abs(y2 - y1) < 5:
                jump = 5 + int(draw.rng.integers(0, 3))
                y2 = y1 + jump if y1 + jump <= 21 else y1 - jump

        records.append(
            ParticipantRecord(
                participant_id=draw.pid,
                round1_window=(start1, end1),
                y1=y1,
                round2_window=(end1, end2) if spec.follow_up is not None else None,
                y2=y2,
            )
        )
        truth_rows.append(
            {
                "participant_id": draw.pid,
                "hawkes_round1": {
                    "gamma": draw.params1.gamma,
                    "alpha": draw.params1.alpha,
                    "beta": draw.params1.beta,
                },
                "hawkes_round2": None
                if draw.params2 is None
                else {
                    "gamma": draw.params2.gamma,
                    "alpha": draw.params2.alpha,
                    "beta": draw.params2.beta,
                },
                "category_probs_round1": draw.probs1.tolist(),
                "rule_features_round1": feature_values[(draw.pid, 1)],
                "rule_features_round2": feature_values.get((draw.pid, 2)),
                "y1": records[-1].y1,
                "y2": records[-1].y2,
                "forced_significant": draw.pid in significant_ids,
            }
        )

    all_events: list[ActivityEvent] = []
    for draw in draws:
        for key in ((draw.pid, 1), (draw.pid, 2)):
            if key in timelines:
                all_events.extend(timelines[key].events)

    ground_truth = {
        "spec": spec.to_json(),
        "label_cutoff": cutoff,
        "participants": truth_rows,
    }
    return SyntheticCohort(
        spec=spec,
        events=all_events,
        records=records,
        timelines=timelines,
        ground_truth=ground_truth,
    )


def write_cohort(cohort: SyntheticCohort, out_dir: str | Path) -> dict[str, Path]:
    """Emit events.jsonl (ingest schema), records.json, ground_truth.json."""
    from .ingest import save_records, write_events_jsonl

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "events": out / "events.jsonl",
        "records": out / "records.json",
        "ground_truth": out / "ground_truth.json",
    }
    write_events_jsonl(cohort.events, paths["events"])
    save_records(cohort.records, paths["records"])
    paths["ground_truth"].write_text(
        json.dumps(cohort.ground_truth, indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    return paths
