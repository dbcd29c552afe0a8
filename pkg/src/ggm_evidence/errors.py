"""Exception types shared across the package."""


class EvidenceError(Exception):
    """Base class for all package errors."""


class NotPositiveDefinite(EvidenceError, ValueError):
    pass


class DomainError(EvidenceError, ValueError):
    pass


class DimensionMismatch(EvidenceError, ValueError):
    pass


class ShapeError(DimensionMismatch):
    pass


class IndexOutOfRange(EvidenceError, IndexError):
    pass


class EmptyInput(EvidenceError, ValueError):
    pass


class DegenerateGig(EvidenceError, ValueError):
    """Raised when a GIG law has b == 0; the caller should use the gamma limit."""


class BesselOverflow(EvidenceError, OverflowError):
    """K_q(x) overflows double precision; ``log_value`` holds log K_q(x)."""

    def __init__(self, log_value: float):
        super().__init__(f"Bessel K overflows double precision (log value {log_value:.6g})")
        self.log_value = log_value


class InitializationError(EvidenceError, ValueError):
    pass


class DegenerateIndicator(EvidenceError, ArithmeticError):
    """Every restricted draw failed the positivity indicator for the diagonal term."""


class QuadratureFailure(EvidenceError, ArithmeticError):
    pass


class IncompatibleReports(EvidenceError, ValueError):
    pass


class ConfigError(EvidenceError, ValueError):
    pass
