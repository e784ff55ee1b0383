"""Exception types shared across the package."""


class CorpusError(ValueError):
    """Raised when a model corpus fails to load or validate."""


class DegenerateFitError(ValueError):
    """Raised when a classifier cannot be fitted (e.g. single-class labels)."""


class UndefinedAccuracyError(ValueError):
    """Raised when an accuracy has an empty denominator (all pairs tied)."""


class ProtocolError(RuntimeError):
    """Raised when an evaluation protocol cannot produce a report."""
