"""Exception types raised across the package."""


class SCAError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(SCAError, ValueError):
    pass


class SingularTransform(SCAError, ValueError):
    """W has (numerically) deficient column rank, so log|det(W^T W)| is undefined."""


class InfeasibleCodebook(SCAError, ValueError):
    pass


class LineSearchFailed(UserWarning):
    """Warning: backtracking found no decrease; the transform is returned unchanged."""


class ShapeUnsupported(SCAError, ValueError):
    pass


class SingularSystem(SCAError, ValueError):
    pass


class EmptyCodebook(SCAError, ValueError):
    pass


class AmbiguationBudgetExceeded(SCAError, ValueError):
    pass


class QueryNoiseExceedsDatabaseNoise(SCAError, ValueError):
    pass


class EmptyNeighborhood(SCAError, LookupError):
    """No stored point lies within the search radius."""


class EmptyGroundTruth(SCAError, ValueError):
    pass


class ZeroReference(SCAError, ValueError):
    pass


class DegenerateDistances(SCAError, ValueError):
    pass


class EmptyQuerySet(SCAError, ValueError):
    pass


class ConfigError(SCAError, ValueError):
    pass


class FormatError(SCAError, ValueError):
    """Malformed binary file. ``offset`` is the byte position where parsing failed."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset
