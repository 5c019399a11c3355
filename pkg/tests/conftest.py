"""Shared fixtures and tiny builders for the test suite."""

from __future__ import annotations

from datetime import datetime, timedelta, timezone

import pytest

from phenolog.ingest import ActivityEvent, ActivityTimeline, build_timeline

TZ_EAST = timezone(timedelta(hours=-4))


def ts(day: int, hour: int = 12, minute: int = 0, second: int = 0, tz=TZ_EAST) -> datetime:
    """Day offsets from Monday 2019-08-05 local midnight."""
    return datetime(2019, 8, 5, tzinfo=tz) + timedelta(
        days=day, hours=hour, minutes=minute, seconds=second
    )


def make_event(
    day: int = 0,
    hour: int = 12,
    minute: int = 0,
    second: int = 0,
    pid: str = "p0",
    source: str = "search",
    category: str | None = "News",
    text: str | None = None,
) -> ActivityEvent:
    return ActivityEvent(
        participant_id=pid,
        timestamp=ts(day, hour, minute, second),
        source=source,
        action="query" if source == "search" else "watch",
        category=category,
        text=text,
    )


def make_timeline(events, pid: str = "p0") -> ActivityTimeline:
    return build_timeline(list(events), pid)


@pytest.fixture
def hourly_events():
    """One event per hour for a day, distinct categories cycling."""
    cats = ["News", "Sports", "Music", "Games"]
    return [
        make_event(day=0, hour=h, category=cats[h % 4], text=f"q{h}") for h in range(24)
    ]
