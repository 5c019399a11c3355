"""Root-level category labeling for activity events.

The external content classifier is an interface, not an implementation.
Three labelers are provided: ``passthrough`` trusts a category already on
the event (truncated to its root level), ``lexicon`` scans the event text
for known keywords, and ``remote-stub`` is a placeholder that only works
when a callback is injected.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from .errors import LabelingError
from .ingest import ActivityEvent, ActivityTimeline

LABELERS = ("passthrough", "lexicon", "remote-stub")

_TOKEN_RE = re.compile(r"[a-z0-9]+")


@dataclass(frozen=True)
class CategoryLabel:
    """A root-level semantic category with a confidence score."""

    root: str
    confidence: float = 1.0

    def __post_init__(self) -> None:
        if not self.root:
            raise ValueError("category root must be nonempty")
        if "/" in self.root:
            raise ValueError(f"category root must not contain '/': {self.root!r}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence out of [0,1]: {self.confidence}")


@dataclass(frozen=True)
class Lexicon:
    """Keyword -> root-category map with a catch-all default.

    Unknown words map to the default rather than being dropped, so every
    event lands in some entropy bin.
    """

    entries: dict[str, str] = field(default_factory=dict)
    default_category: str = "Other"

    def __post_init__(self) -> None:
        for keyword, category in self.entries.items():
            if not keyword:
                raise ValueError("lexicon keywords must be nonempty")
            if keyword != keyword.lower():
                raise ValueError(f"lexicon keywords must be lowercase: {keyword!r}")
            if not category or "/" in category:
                raise ValueError(f"bad lexicon category {category!r}")

    @classmethod
    def from_file(cls, path: str | Path) -> "Lexicon":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(entries=dict(data.get("entries", {})), default_category=data.get("default", "Other"))

    def to_json(self) -> dict:
        return {"default": self.default_category, "entries": dict(self.entries)}


def root_category(raw: str) -> str:
    """Truncate a hierarchical label like ``/News/Sports`` to its root."""
    root = raw.lstrip("/").split("/", 1)[0].strip()
    if not root:
        raise LabelingError(f"cannot extract root category from {raw!r}")
    return root


def label_event(
    event: ActivityEvent,
    labeler: str = "passthrough",
    lexicon: Lexicon | None = None,
    remote: Callable[[ActivityEvent], CategoryLabel] | None = None,
) -> CategoryLabel:
    """Assign a root-level category to one event. Deterministic."""
    if labeler == "passthrough":
        if event.category is None:
            raise LabelingError(f"unlabeled event at {event.timestamp.isoformat()}")
        return CategoryLabel(root=root_category(event.category), confidence=1.0)
    if labeler == "lexicon":
        if lexicon is None:
            raise LabelingError("lexicon labeler requires a lexicon")
        for token in _TOKEN_RE.findall((event.text or "").lower()):
            category = lexicon.entries.get(token)
            if category is not None:
                return CategoryLabel(root=category, confidence=1.0)
        return CategoryLabel(root=lexicon.default_category, confidence=0.5)
    if labeler == "remote-stub":
        if remote is None:
            raise LabelingError("remote labeler not configured")
        return remote(event)
    raise LabelingError(f"unknown labeler {labeler!r}")


def label_timeline(
    timeline: ActivityTimeline,
    labeler: str = "passthrough",
    lexicon: Lexicon | None = None,
    remote: Callable[[ActivityEvent], CategoryLabel] | None = None,
) -> list[CategoryLabel]:
    """Label every event in order; errors name the offending event."""
    return [label_event(e, labeler=labeler, lexicon=lexicon, remote=remote) for e in timeline.events]


def labels_for_events(
    events: Sequence[ActivityEvent],
    labeler: str = "passthrough",
    lexicon: Lexicon | None = None,
) -> list[CategoryLabel]:
    return [label_event(e, labeler=labeler, lexicon=lexicon) for e in events]
