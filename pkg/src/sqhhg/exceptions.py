"""Exception hierarchy shared across the package."""


class SqhhgError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(SqhhgError, ValueError):
    """A physical or numerical parameter is out of its valid domain."""


class InsufficientDataError(SqhhgError, ValueError):
    """Too few samples/shots for the requested statistic."""


class ResolutionError(SqhhgError, ValueError):
    """A grid is too coarse (or too short) for the requested operation."""


class CalibrationError(SqhhgError, RuntimeError):
    """Soft-core calibration could not bracket or converge."""


class ConvergenceError(SqhhgError, RuntimeError):
    """An iterative solver or quadrature failed its convergence check."""


class NumericalInstabilityError(SqhhgError, RuntimeError):
    """Propagation produced NaNs or inflated the norm."""


class UndefinedRatioError(SqhhgError, RuntimeError):
    """Witness ratio denominator is statistically consistent with zero."""


class ValidityWarning(UserWarning):
    """An asymptotic (small-parameter) formula was evaluated outside its
    stated validity domain; the value is still returned."""
