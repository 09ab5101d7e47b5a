"""Exception types shared across the tracking library."""


class TrackError(Exception):
    """Base class for recoverable tracking errors."""


class InsufficientEvidenceError(TrackError):
    """Too few point matches to estimate global motion."""


class NoEvidenceError(TrackError):
    """A residual map carries no usable signal."""


class NonSalientError(TrackError):
    """No usable salient color keys for seeding or segmentation."""


class NoCandidatesError(TrackError):
    """A proposal stage produced an empty candidate set."""


class EmptyRegionError(TrackError):
    """A requested region contains no pixels."""


class UndefinedSimilarityError(TrackError):
    """Similarity is undefined (zero-norm input)."""


class FormatError(TrackError):
    """Malformed dataset file or results file."""


class ConfigError(TrackError):
    """Invalid or unknown tracker configuration."""
