"""Parse, redact, and window raw activity logs.

The canonical interchange format is JSONL with one event per line and the
exact keys ``participant_id, timestamp, source, action, category, text``.
CSV with the same columns is accepted for ingestion only. Timestamps are
RFC-3339 with a UTC offset; the offset is retained, and every downstream
hour-of-day computation uses the local wall clock it implies.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone, tzinfo
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .errors import EmptyWindowError, IngestError

EVENT_FIELDS = ("participant_id", "timestamp", "source", "action", "category", "text")

SOURCES = ("search", "youtube")
# Each source records exactly one kind of engagement.
ACTION_FOR_SOURCE = {"search": "query", "youtube": "watch"}

# Redaction patterns, replaced by fixed tokens. Digit runs are classified
# by shape (SSN) and then by digit count: 13-19 -> card, 7-15 -> phone.
_EMAIL_RE = re.compile(r"[A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)+")
_DIGIT_RUN_RE = re.compile(r"\b\d(?:[\d\-. ()]*\d)?\b")
_SSN_SHAPE_RE = re.compile(r"^\d{3}-\d{2}-\d{4}$")


def redact(text: str) -> str:
    """Replace email, phone-like, SSN-like, and card-like spans with tokens.

    Deliberately conservative: any run of 7+ digits (with common
    separators) is treated as contact or account data. Idempotent, and
    byte-identical on text without matching spans.
    """
    out = _EMAIL_RE.sub("[EMAIL]", text)

    def _classify(match: re.Match[str]) -> str:
        run = match.group(0)
        if _SSN_SHAPE_RE.match(run):
            return "[SSN]"
        n_digits = sum(ch.isdigit() for ch in run)
        if 13 <= n_digits <= 19:
            return "[CARD]"
        if 7 <= n_digits <= 15:
            return "[PHONE]"
        return run

    return _DIGIT_RUN_RE.sub(_classify, out)


def parse_timestamp(raw: str, assume_offset: tzinfo | None = None) -> datetime:
    """Parse an RFC-3339 timestamp, keeping its UTC offset.

    Naive timestamps are accepted only when ``assume_offset`` supplies the
    offset to attach (the ``--assume-offset`` CLI escape hatch).
    """
    try:
        parsed = datetime.fromisoformat(raw.replace("Z", "+00:00"))
    except (ValueError, AttributeError, TypeError) as exc:
        raise ValueError(f"invalid timestamp {raw!r}") from exc
    if parsed.tzinfo is None:
        if assume_offset is None:
            raise ValueError(f"timestamp {raw!r} has no UTC offset (use --assume-offset)")
        parsed = parsed.replace(tzinfo=assume_offset)
    return parsed


@dataclass(frozen=True, order=False)
class ActivityEvent:
    """One timestamped search or watch action."""

    participant_id: str
    timestamp: datetime
    source: str
    action: str
    category: str | None = None
    text: str | None = None

    def __post_init__(self) -> None:
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")
        if self.action != ACTION_FOR_SOURCE[self.source]:
            raise ValueError(
                f"source {self.source!r} implies action "
                f"{ACTION_FOR_SOURCE[self.source]!r}, got {self.action!r}"
            )
        if self.timestamp.tzinfo is None:
            raise ValueError("event timestamp must carry a UTC offset")

    def sort_key(self) -> tuple:
        # Absolute instant first; deterministic tie-break on content.
        return (self.timestamp, self.source, self.text or "", self.category or "")

    def to_record(self) -> dict:
        return {
            "participant_id": self.participant_id,
            "timestamp": self.timestamp.isoformat(),
            "source": self.source,
            "action": self.action,
            "category": self.category,
            "text": self.text,
        }


@dataclass(frozen=True)
class ActivityTimeline:
    """Time-ordered events for one participant over a known span."""

    participant_id: str
    events: tuple[ActivityEvent, ...]
    span_start: datetime
    span_end: datetime

    def __len__(self) -> int:
        return len(self.events)

    def span_hours(self) -> float:
        return (self.span_end - self.span_start).total_seconds() / 3600.0


@dataclass(frozen=True)
class ParticipantRecord:
    """Survey identity: score(s) plus the activity windows they cover."""

    participant_id: str
    round1_window: tuple[datetime, datetime]
    y1: int
    round2_window: tuple[datetime, datetime] | None = None
    y2: int | None = None
    demographics: dict[str, str] | None = None

    def __post_init__(self) -> None:
        if not 0 <= self.y1 <= 21:
            raise ValueError(f"y1 out of GAD-7 range: {self.y1}")
        if self.y2 is not None and not 0 <= self.y2 <= 21:
            raise ValueError(f"y2 out of GAD-7 range: {self.y2}")
        if self.round2_window is not None and self.round2_window[0] < self.round1_window[1]:
            raise ValueError("round2 window must start at or after round1 window end")

    @property
    def has_followup(self) -> bool:
        return self.round2_window is not None and self.y2 is not None


@dataclass
class ParseReport:
    """Events recovered from a file plus line-level errors."""

    events: list[ActivityEvent]
    errors: list[dict] = field(default_factory=list)

    @property
    def n_malformed(self) -> int:
        return len(self.errors)


def _event_from_mapping(
    rec: dict, assume_offset: tzinfo | None, apply_redaction: bool = True
) -> ActivityEvent:
    missing = [k for k in ("participant_id", "timestamp", "source", "action") if not rec.get(k)]
    if missing:
        raise ValueError(f"missing field(s): {', '.join(missing)}")
    text = rec.get("text") or None
    if text is not None and apply_redaction:
        text = redact(text)
    return ActivityEvent(
        participant_id=str(rec["participant_id"]),
        timestamp=parse_timestamp(str(rec["timestamp"]), assume_offset),
        source=str(rec["source"]),
        action=str(rec["action"]),
        category=rec.get("category") or None,
        text=text,
    )


def _iter_jsonl(path: Path) -> Iterator[tuple[int, dict | str]]:
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                yield lineno, f"invalid JSON: {exc.msg}"


def _iter_csv(path: Path) -> Iterator[tuple[int, dict | str]]:
    with path.open("r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        unknown = set(reader.fieldnames or ()) - set(EVENT_FIELDS)
        if unknown:
            raise IngestError(f"{path}: unexpected CSV columns {sorted(unknown)}")
        for lineno, row in enumerate(reader, start=2):
            yield lineno, {k: (v or None) for k, v in row.items()}


def parse_events(
    path: str | Path,
    format: str = "jsonl",
    assume_offset: tzinfo | None = None,
    max_malformed_fraction: float = 0.10,
) -> ParseReport:
    """Parse a JSONL or CSV event file into validated, redacted events.

    Malformed lines land in the report's ``errors`` (with line numbers)
    instead of being dropped silently; more than ``max_malformed_fraction``
    of them is a fatal :class:`IngestError`.
    """
    path = Path(path)
    if format not in ("jsonl", "csv"):
        raise IngestError(f"unknown format {format!r}")
    try:
        raw_iter = _iter_jsonl(path) if format == "jsonl" else _iter_csv(path)
        records = list(raw_iter)
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise IngestError(f"{path} is not UTF-8: {exc}") from exc

    report = ParseReport(events=[])
    for lineno, rec in records:
        if isinstance(rec, str):
            report.errors.append({"line": lineno, "reason": rec})
            continue
        try:
            report.events.append(_event_from_mapping(rec, assume_offset))
        except ValueError as exc:
            report.errors.append({"line": lineno, "reason": str(exc)})

    total = len(records)
    if total and report.n_malformed / total > max_malformed_fraction:
        raise IngestError(
            f"{path}: {report.n_malformed}/{total} malformed lines "
            f"(first: line {report.errors[0]['line']}, {report.errors[0]['reason']})"
        )
    return report


def write_events_jsonl(events: Iterable[ActivityEvent], path: str | Path) -> None:
    """Write events in the canonical JSONL interchange schema."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for event in events:
            handle.write(json.dumps(event.to_record(), ensure_ascii=False) + "\n")


def write_error_report(errors: Sequence[dict], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        for err in errors:
            handle.write(json.dumps(err, ensure_ascii=False) + "\n")


def build_timeline(events: Sequence[ActivityEvent], participant_id: str) -> ActivityTimeline:
    """Sort, deduplicate, and span-bound one participant's events."""
    for event in events:
        if event.participant_id != participant_id:
            raise IngestError(
                f"event participant {event.participant_id!r} != {participant_id!r}"
            )
    unique = sorted(set(events), key=ActivityEvent.sort_key)
    if not unique:
        raise EmptyWindowError("empty timeline")
    return ActivityTimeline(
        participant_id=participant_id,
        events=tuple(unique),
        span_start=unique[0].timestamp,
        span_end=unique[-1].timestamp,
    )


def cut_window(timeline: ActivityTimeline, start: datetime, end: datetime) -> ActivityTimeline:
    """Restrict a timeline to events with ``start <= t < end``."""
    if start >= end:
        raise ValueError("window start must precede end")
    kept = tuple(e for e in timeline.events if start <= e.timestamp < end)
    if not kept:
        raise EmptyWindowError("empty window")
    return ActivityTimeline(
        participant_id=timeline.participant_id,
        events=kept,
        span_start=start,
        span_end=end,
    )


def span_dates(span_start: datetime, span_end: datetime) -> list[date]:
    """Every calendar day covered by the span.

    ``span_end`` is treated as exclusive when it falls exactly on local
    midnight, so a window ``[Aug 1, Aug 15)`` covers 14 days, not 15.
    """
    end_eff = span_end
    if (span_end.hour, span_end.minute, span_end.second, span_end.microsecond) == (0, 0, 0, 0):
        end_eff = span_end - timedelta(microseconds=1)
    first, last = span_start.date(), end_eff.date()
    if last < first:
        last = first
    return [first + timedelta(days=i) for i in range((last - first).days + 1)]


def records_to_json(records: Sequence[ParticipantRecord]) -> list[dict]:
    out = []
    for rec in records:
        out.append(
            {
                "participant_id": rec.participant_id,
                "round1_window": {
                    "start": rec.round1_window[0].isoformat(),
                    "end": rec.round1_window[1].isoformat(),
                },
                "round2_window": None
                if rec.round2_window is None
                else {
                    "start": rec.round2_window[0].isoformat(),
                    "end": rec.round2_window[1].isoformat(),
                },
                "y1": rec.y1,
                "y2": rec.y2,
                "demographics": rec.demographics,
            }
        )
    return out


def records_from_json(data: list[dict]) -> list[ParticipantRecord]:
    records = []
    for item in data:
        r1 = item["round1_window"]
        r2 = item.get("round2_window")
        records.append(
            ParticipantRecord(
                participant_id=str(item["participant_id"]),
                round1_window=(parse_timestamp(r1["start"]), parse_timestamp(r1["end"])),
                y1=int(item["y1"]),
                round2_window=None
                if r2 is None
                else (parse_timestamp(r2["start"]), parse_timestamp(r2["end"])),
                y2=None if item.get("y2") is None else int(item["y2"]),
                demographics=item.get("demographics"),
            )
        )
    return records


def load_records(path: str | Path) -> list[ParticipantRecord]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IngestError(f"{path}: invalid JSON ({exc.msg})") from exc
    if not isinstance(data, list):
        raise IngestError(f"{path}: expected a JSON array of participant records")
    return records_from_json(data)


def save_records(records: Sequence[ParticipantRecord], path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(records_to_json(records), indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


UTC = timezone.utc

__all__ = [
    "ActivityEvent",
    "ActivityTimeline",
    "ParticipantRecord",
    "ParseReport",
    "EVENT_FIELDS",
    "parse_events",
    "parse_timestamp",
    "redact",
    "build_timeline",
    "cut_window",
    "span_dates",
    "write_events_jsonl",
    "write_error_report",
    "load_records",
    "save_records",
    "records_to_json",
    "records_from_json",
]
