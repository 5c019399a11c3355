"""Domain exceptions shared across the package.

``PhenologError`` marks expected, user-facing failures (bad input, empty
windows, refused fits); the CLI maps these to exit code 1 and anything
else to exit code 2.
"""


class PhenologError(Exception):
    """Base class for expected domain errors."""


class IngestError(PhenologError):
    """Raised for unreadable or structurally broken input files."""


class EmptyWindowError(PhenologError):
    """Raised when a timeline or cut window contains no events."""


class LabelingError(PhenologError):
    """Raised when an event cannot be assigned a category."""


class FeatureError(PhenologError):
    """Raised when a feature cannot be computed from a window."""


class FitError(PhenologError):
    """Raised when a model or point-process fit is refused."""


class EvaluationError(PhenologError):
    """Raised for invalid fold plans or metric inputs."""
