"""Exception hierarchy.

Every error class carries a distinct process exit code so the CLI can
translate failures into meaningful statuses (usage errors exit 2, which
argparse owns).
"""


class CmchistError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class DataError(CmchistError):
    """Malformed or inconsistent trajectory input."""

    exit_code = 3


class DimensionMismatchError(DataError):
    """Records disagree on state/control dimensionality."""


class NonFiniteCoordinateError(DataError):
    """A coordinate is NaN or infinite."""


class TooFewRecordsError(DataError):
    """A trajectory needs at least 4 records (3 transitions)."""


class ZeroWidthAxisError(DataError):
    """A rescaling axis has max == min."""


class GeometryError(CmchistError):
    exit_code = 4


class MaxDepthExceededError(GeometryError):
    """Refusing to split below the configured maximum depth."""


class EnumerationTooLargeError(GeometryError):
    """The partition family is too large to enumerate exhaustively."""


class UnindexedDepthError(GeometryError):
    """A count query addressed a depth beyond the tree's depth bound."""


class PointOutsideDomainError(GeometryError):
    """Evaluation point lies outside the unit cube."""


class NegativeDensityError(CmchistError):
    """Density values must be nonnegative."""

    exit_code = 5


class ChainSpecError(CmchistError):
    """Invalid simulator specification (bad tensor, parameter range, ...)."""

    exit_code = 6


class DiagnosticsError(CmchistError):
    exit_code = 7


class SetNeverVisitedError(DiagnosticsError):
    """Return-time statistics need at least one visit."""


class MarkovControlsRequiredError(DiagnosticsError):
    """Weak-mixing products are only defined for Markov control rules."""


class MissingFieldError(DiagnosticsError):
    """A remainder flavor is missing one of its required inputs."""


class ConfigError(CmchistError):
    """Invalid experiment configuration."""

    exit_code = 8
