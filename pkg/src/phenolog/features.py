"""The 16 behavioral features computed from one activity window.

Canonical order: four activity-volume statistics (log-transformed daily
and weekly count mean/variance over the pooled search+watch stream),
category entropy and hour-of-day entropy (each for weekdays, weekends,
and in total, natural log), the three self-excitation parameters of the
fitted point process, and the modal hour of long-inactivity midpoints at
8/9/10-hour thresholds.

All features are functions of the event multiset: reordering input events
never changes any value. Extraction is stateless; cohort-level
normalization happens later, inside model training, per fold.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, fields
from datetime import timedelta
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import hawkes
from .errors import FeatureError, FitError, PhenologError
from .ingest import ActivityTimeline, span_dates
from .taxonomy import CategoryLabel

FEATURE_NAMES: tuple[str, ...] = (
    "daily_mean_log",
    "daily_var_log",
    "weekly_mean_log",
    "weekly_var_log",
    "cat_entropy_weekday",
    "cat_entropy_weekend",
    "cat_entropy_total",
    "time_entropy_weekday",
    "time_entropy_weekend",
    "time_entropy_total",
    "hawkes_gamma",
    "hawkes_alpha",
    "hawkes_beta",
    "inactivity_mode_8h",
    "inactivity_mode_9h",
    "inactivity_mode_10h",
)

# The 9-feature projection used by the score-prediction task.
REGRESSION_FEATURE_NAMES: tuple[str, ...] = (
    "cat_entropy_weekday",
    "cat_entropy_weekend",
    "time_entropy_weekday",
    "time_entropy_weekend",
    "hawkes_gamma",
    "hawkes_alpha",
    "hawkes_beta",
    "inactivity_mode_9h",
    "inactivity_mode_10h",
)

DAY_FILTERS = ("weekday", "weekend", "total")
INACTIVITY_THRESHOLDS = (8.0, 9.0, 10.0)
MIN_SPAN_DAYS = 14

# Deterministic tie-break target for the modal inactivity hour: reported
# midpoint modes cluster in the early morning, so prefer the bin
# circularly closest to 06:00, then the earlier bin.
_MODE_TIE_ANCHOR = 6


@dataclass(frozen=True)
class FeatureVector:
    """The canonical 16 features; inactivity modes may be missing."""

    daily_mean_log: float
    daily_var_log: float
    weekly_mean_log: float
    weekly_var_log: float
    cat_entropy_weekday: float
    cat_entropy_weekend: float
    cat_entropy_total: float
    time_entropy_weekday: float
    time_entropy_weekend: float
    time_entropy_total: float
    hawkes_gamma: float
    hawkes_alpha: float
    hawkes_beta: float
    inactivity_mode_8h: float | None
    inactivity_mode_9h: float | None
    inactivity_mode_10h: float | None

    def as_array(self) -> np.ndarray:
        """Canonical 16-vector; missing entries become NaN."""
        return np.array(
            [math.nan if getattr(self, n) is None else float(getattr(self, n)) for n in FEATURE_NAMES]
        )

    def regression_subset(self) -> np.ndarray:
        """The 9 prediction-task components, copied verbatim."""
        return np.array(
            [
                math.nan if getattr(self, n) is None else float(getattr(self, n))
                for n in REGRESSION_FEATURE_NAMES
            ]
        )

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "FeatureVector":
        if len(values) != len(FEATURE_NAMES):
            raise ValueError(f"expected {len(FEATURE_NAMES)} values, got {len(values)}")
        kwargs = {}
        for name, value in zip(FEATURE_NAMES, values):
            value = float(value)
            kwargs[name] = None if math.isnan(value) else value
        return cls(**kwargs)


assert tuple(f.name for f in fields(FeatureVector)) == FEATURE_NAMES


def _entropy_from_counts(counts: Iterable[int]) -> float:
    occupied = [c for c in counts if c > 0]
    # Uniform bins short-circuit to ln k so the closed form is exact
    # (float accumulation would land within an ulp of it otherwise).
    if len(set(occupied)) == 1:
        return math.log(len(occupied))
    total = float(sum(occupied))
    h = 0.0
    for c in occupied:
        p = c / total
        h -= p * math.log(p)
    return h


def _filtered_indices(timeline: ActivityTimeline, day_filter: str) -> list[int]:
    if day_filter not in DAY_FILTERS:
        raise ValueError(f"unknown day filter {day_filter!r}")
    if day_filter == "total":
        return list(range(len(timeline.events)))
    want_weekend = day_filter == "weekend"
    return [
        i
        for i, e in enumerate(timeline.events)
        if (e.timestamp.weekday() >= 5) == want_weekend
    ]


def activity_stats(timeline: ActivityTimeline) -> tuple[float, float, float, float]:
    """ln(1+x) of daily/weekly count mean and population variance.

    Daily counts cover every calendar day in the span (zero days count);
    weekly counts cover Monday-start weeks that lie fully inside the span.
    """
    if not timeline.events:
        raise FeatureError("empty timeline")
    if timeline.span_end - timeline.span_start < timedelta(days=MIN_SPAN_DAYS):
        raise FeatureError("window too short")

    day_counts = Counter(e.timestamp.date() for e in timeline.events)
    days = span_dates(timeline.span_start, timeline.span_end)
    universe = sorted(set(days) | set(day_counts))
    daily = np.array([day_counts.get(d, 0) for d in universe], dtype=float)

    first, last = universe[0], universe[-1]
    monday = first + timedelta(days=(7 - first.weekday()) % 7)
    weekly = []
    while monday + timedelta(days=6) <= last:
        weekly.append(sum(day_counts.get(monday + timedelta(days=i), 0) for i in range(7)))
        monday += timedelta(days=7)
    if not weekly:
        raise FeatureError("window too short")  # unreachable for >= 14-day spans
    weekly_arr = np.array(weekly, dtype=float)

    return (
        math.log1p(float(daily.mean())),
        math.log1p(float(daily.var())),
        math.log1p(float(weekly_arr.mean())),
        math.log1p(float(weekly_arr.var())),
    )


def category_entropy(
    timeline: ActivityTimeline,
    labels: Sequence[CategoryLabel],
    day_filter: str = "total",
) -> float:
    """Shannon entropy of the category distribution, natural log."""
    if len(labels) != len(timeline.events):
        raise ValueError("one label per event required")
    kept = _filtered_indices(timeline, day_filter)
    if not kept:
        raise FeatureError(f"no events in filter: {day_filter}")
    counts = Counter(labels[i].root for i in kept)
    return _entropy_from_counts(counts.values())


def time_entropy(timeline: ActivityTimeline, day_filter: str = "total") -> float:
    """Shannon entropy over the 24 local hour-of-day bins, natural log."""
    kept = _filtered_indices(timeline, day_filter)
    if not kept:
        raise FeatureError(f"no events in filter: {day_filter}")
    counts = Counter(timeline.events[i].timestamp.hour for i in kept)
    return _entropy_from_counts(counts.values())


def inactivity_midpoint_hours(timeline: ActivityTimeline, k_hours: float) -> list[float]:
    """Local hour-of-day of the midpoint of every gap strictly longer than k."""
    events = timeline.events
    mids = []
    for prev, nxt in zip(events, events[1:]):
        gap = nxt.timestamp - prev.timestamp
        if gap > timedelta(hours=k_hours):
            mid = prev.timestamp + gap / 2
            mids.append(mid.hour + mid.minute / 60.0 + mid.second / 3600.0 + mid.microsecond / 3.6e9)
    return mids


def inactivity_mode(timeline: ActivityTimeline, k_hours: float) -> float:
    """Most frequent hour bin of long-gap midpoints (bin lower edge).

    Ties prefer the bin circularly closest to 06:00, then the earlier bin.
    """
    if len(timeline.events) < 2:
        raise FeatureError("need at least 2 events for inactivity gaps")
    mids = inactivity_midpoint_hours(timeline, k_hours)
    if not mids:
        raise FeatureError(f"no inactivity > {k_hours:g}h")
    counts = np.bincount([int(m) % 24 for m in mids], minlength=24)
    best = counts.max()
    candidates = np.flatnonzero(counts == best)
    away = np.minimum(np.abs(candidates - _MODE_TIE_ANCHOR), 24 - np.abs(candidates - _MODE_TIE_ANCHOR))
    order = np.lexsort((candidates, away))
    return float(candidates[order[0]])


def event_times_hours(timeline: ActivityTimeline) -> tuple[np.ndarray, float]:
    """Event times in hours from span start, plus the horizon.

    Simultaneous instants (distinct events within the same recorded
    second) are jittered by +1 ms per rank so the point-process
    likelihood sees strictly increasing times.
    """
    start = timeline.span_start
    times = np.array(
        [(e.timestamp - start).total_seconds() / 3600.0 for e in timeline.events]
    )
    jitter_step = 0.001 / 3600.0
    for i in range(1, times.size):
        if times[i] <= times[i - 1]:
            times[i] = times[i - 1] + jitter_step
    horizon = max(timeline.span_hours(), float(times[-1]) if times.size else 0.0)
    return times, horizon


def fit_hawkes_features(timeline: ActivityTimeline) -> hawkes.HawkesFit:
    times, horizon = event_times_hours(timeline)
    return hawkes.fit(times, horizon)


def extract_features(
    timeline: ActivityTimeline,
    labels: Sequence[CategoryLabel],
    inactivity_thresholds: Sequence[float] = INACTIVITY_THRESHOLDS,
) -> FeatureVector:
    """Assemble the canonical 16-vector for one window.

    A window with no qualifying inactivity gap at some threshold yields a
    missing value there (imputed later, inside model training); any other
    component failure propagates with the component named. Non-default
    ``inactivity_thresholds`` fill the three mode slots in order.
    """
    if len(inactivity_thresholds) != 3:
        raise ValueError("exactly three inactivity thresholds required")

    def _run(component: str, fn):
        try:
            return fn()
        except PhenologError as exc:
            raise FeatureError(f"{component}: {exc}") from exc

    daily_mean, daily_var, weekly_mean, weekly_var = _run(
        "activity_stats", lambda: activity_stats(timeline)
    )
    cat = {
        f: _run(f"category_entropy[{f}]", lambda f=f: category_entropy(timeline, labels, f))
        for f in DAY_FILTERS
    }
    tim = {
        f: _run(f"time_entropy[{f}]", lambda f=f: time_entropy(timeline, f))
        for f in DAY_FILTERS
    }
    try:
        fit_result = fit_hawkes_features(timeline)
    except (FitError, ValueError) as exc:
        raise FeatureError(f"hawkes: {exc}") from exc

    modes: list[float | None] = []
    for k in inactivity_thresholds:
        try:
            modes.append(inactivity_mode(timeline, k))
        except FeatureError:
            modes.append(None)

    return FeatureVector(
        daily_mean_log=daily_mean,
        daily_var_log=daily_var,
        weekly_mean_log=weekly_mean,
        weekly_var_log=weekly_var,
        cat_entropy_weekday=cat["weekday"],
        cat_entropy_weekend=cat["weekend"],
        cat_entropy_total=cat["total"],
        time_entropy_weekday=tim["weekday"],
        time_entropy_weekend=tim["weekend"],
        time_entropy_total=tim["total"],
        hawkes_gamma=fit_result.params.gamma,
        hawkes_alpha=fit_result.params.alpha,
        hawkes_beta=fit_result.params.beta,
        inactivity_mode_8h=modes[0],
        inactivity_mode_9h=modes[1],
        inactivity_mode_10h=modes[2],
    )


@dataclass(frozen=True)
class FeatureRow:
    """One (participant, round) row of the feature table."""

    participant_id: str
    round: int
    vector: FeatureVector


CSV_HEADER = ("participant_id", "round") + FEATURE_NAMES


def write_feature_csv(rows: Sequence[FeatureRow], path: str | Path) -> None:
    """Write the feature table; missing values are empty cells, never 0."""
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(CSV_HEADER)
        for row in rows:
            values = []
            for name in FEATURE_NAMES:
                v = getattr(row.vector, name)
                values.append("" if v is None else repr(float(v)))
            writer.writerow([row.participant_id, row.round, *values])


def read_feature_csv(path: str | Path) -> list[FeatureRow]:
    with Path(path).open("r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = tuple(next(reader, ()))
        if header != CSV_HEADER:
            raise FeatureError(
                f"{path}: feature order mismatch (expected {','.join(CSV_HEADER)})"
            )
        rows = []
        for raw in reader:
            if not raw:
                continue
            pid, rnd, *values = raw
            arr = [math.nan if v == "" else float(v) for v in values]
            rows.append(
                FeatureRow(participant_id=pid, round=int(rnd), vector=FeatureVector.from_array(arr))
            )
    return rows
