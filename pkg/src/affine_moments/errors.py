"""Exception hierarchy shared by all modules."""


class AffineError(Exception):
    """Base class for errors raised by affine_moments."""


class StructuralError(AffineError, ValueError):
    """A parameter has the wrong shape or type.

    Distinct from an admissibility violation, which is reported in a
    ValidationReport rather than raised.
    """


class DomainError(AffineError, ValueError):
    """An argument lies outside the region where an operation is defined."""


class ConvergenceError(AffineError, RuntimeError):
    """A numerical procedure did not reach its requested tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class UnsupportedError(AffineError):
    """The requested operation is not available for this model or verdict."""
