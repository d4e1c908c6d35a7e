"""Exception types shared across the library."""


class LqgError(Exception):
    """Base class for library errors."""


class PoleError(LqgError):
    """Conformal map evaluated at a pole."""


class DomainMismatch(LqgError):
    """Grids, measures and maps refer to different domains."""


class DomainError(LqgError):
    """Operation not supported on this domain."""


class GeometryError(LqgError):
    """Geometric precondition violated (circle exits domain, ...)."""


class DiagonalError(LqgError):
    """Green kernel evaluated on the diagonal."""


class QuadratureError(LqgError):
    """Malformed quadrature weights."""


class SizeError(LqgError):
    """Grid exceeds the configured node budget."""


class FactorizationError(LqgError):
    """Covariance not numerically positive semidefinite beyond tolerance."""


class MissingCovarianceMetadata(LqgError):
    """Field lacks the variance/diagonal data needed for chaos measures."""


class NoFreeBoundary(LqgError):
    """Boundary measure requested for a field without a free segment."""


class CoincidentInsertions(LqgError):
    """Two insertion points snapped to the same node."""


class BoundsViolation(LqgError):
    """Seiberg-type admissibility bounds violated."""


class EmptySample(LqgError):
    """Statistical operation on an empty sample."""


class StepSizeError(LqgError):
    """Excursion step size too coarse for the window."""


class WindowMismatch(LqgError):
    """Excursion window and strip grid disagree."""


class MaxAttemptsExceeded(LqgError):
    """Accept-reject loop exhausted its attempt budget."""

    def __init__(self, message: str, acceptance_rate: float = 0.0):
        super().__init__(message)
        self.acceptance_rate = acceptance_rate


class GridTooCoarse(LqgError):
    """Grid does not resolve the scales required by the sampler."""


class ParseError(LqgError):
    """Malformed persisted sample record."""

    def __init__(self, message: str, line: int = -1):
        super().__init__(f"line {line}: {message}" if line >= 0 else message)
        self.line = line


class UnsupportedCoupling(LqgError):
    """Requested gamma outside the range supported by an exact sampler."""
