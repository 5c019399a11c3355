"""phenolog: behavioral features and anxiety models from activity logs."""

from .errors import PhenologError
from .features import (
    FEATURE_NAMES,
    REGRESSION_FEATURE_NAMES,
    FeatureRow,
    FeatureVector,
    extract_features,
)
from .hawkes import HawkesFit, HawkesParams
from .ingest import (
    ActivityEvent,
    ActivityTimeline,
    ParticipantRecord,
    build_timeline,
    cut_window,
    parse_events,
    redact,
)
from .synth import CohortSpec, generate_cohort
from .taxonomy import CategoryLabel, Lexicon, label_event

__version__ = "0.1.0"

__all__ = [
    "ActivityEvent",
    "ActivityTimeline",
    "CategoryLabel",
    "CohortSpec",
    "FEATURE_NAMES",
    "FeatureRow",
    "FeatureVector",
    "HawkesFit",
    "HawkesParams",
    "Lexicon",
    "ParticipantRecord",
    "PhenologError",
    "REGRESSION_FEATURE_NAMES",
    "build_timeline",
    "cut_window",
    "extract_features",
    "generate_cohort",
    "label_event",
    "parse_events",
    "redact",
    "__version__",
]
