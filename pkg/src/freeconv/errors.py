"""Exception hierarchy.

Validation errors signal bad inputs (CLI exit code 1); numerical errors
signal a pipeline that started from valid inputs but could not finish
(CLI exit code 3).
"""


class FreeconvError(Exception):
    """Base class for all package errors."""


class ValidationError(FreeconvError):
    """Invalid parameters or malformed input data."""


class DomainError(ValidationError):
    """Evaluation requested at a point outside the operation's domain."""


class NumericalError(FreeconvError):
    """A numerical procedure failed to produce a trustworthy result."""


class InversionError(NumericalError):
    """Newton inversion of a transform did not converge.

    Carries the last iterate and the residual at that iterate so callers
    can diagnose branch problems.
    """

    def __init__(self, message, last_iterate=None, residual=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual


class PipelineError(NumericalError):
    """A convolution pipeline failed mid-contour.

    ``point`` is the contour point being solved when the failure occurred.
    """

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class SupportCoverageError(NumericalError):
    """Recovered mass is out of tolerance; the contour grid is too narrow."""


class BranchError(NumericalError):
    """An evaluator violated the Herglotz sign convention."""
