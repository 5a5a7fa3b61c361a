"""Exception hierarchy shared by every module.

The CLI maps :class:`ValidationError` subclasses to exit status 2 and
:class:`AccuracyError` subclasses to exit status 3.
"""

from __future__ import annotations


class LeffError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(LeffError, ValueError):
    """Invalid input or configuration."""


class DomainError(ValidationError):
    """Argument outside the domain of a special function."""


class SingularityError(ValidationError):
    """Evaluation at a point where the quantity diverges."""


class SymmetryError(ValidationError):
    """Input function lacks a symmetry that the construction requires."""


class ConfigurationError(ValidationError):
    """Inconsistent grid or solver configuration."""


class UnsupportedError(ValidationError):
    """Requested case lies outside what the solvers handle."""


class BelowThresholdError(ValidationError):
    """Field strength below a theorem threshold."""

    def __init__(self, message: str, threshold: float):
        super().__init__(message)
        self.threshold = threshold


class IllConditionedError(ValidationError):
    """Spectral parameter too close to a spectrum."""


class AccuracyError(LeffError, ArithmeticError):
    """A numerical tolerance could not be met."""

    def __init__(self, message: str, tolerance: float | None = None):
        super().__init__(message)
        self.tolerance = tolerance
