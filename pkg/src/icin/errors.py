"""Exception hierarchy.

Every error raised by the library derives from :class:`IcinError`.  The
subclasses are grouped so the command line front end can map them onto exit
codes: input problems, numeric problems, and infeasibility.
"""


class IcinError(Exception):
    """Base class for all library errors."""


class InvalidArgumentError(IcinError, ValueError):
    """An argument violates a documented precondition."""


class PositivityError(InvalidArgumentError):
    """An observed-data mass that must be strictly positive is not."""

    def __init__(self, message, pattern=None, cell=None):
        super().__init__(message)
        self.pattern = pattern
        self.cell = cell


class UndefinedConditionalError(InvalidArgumentError):
    """A conditional probability is requested on a zero-probability event."""


class UnsupportedSizeError(InvalidArgumentError):
    """A table is too large for the requested operation."""


class DegenerateSampleError(InvalidArgumentError):
    """A sample carries too little variation for the requested estimate."""


class FitError(InvalidArgumentError):
    """A model could not be fitted from the supplied data."""


class ExtrapolationError(InvalidArgumentError):
    """A query point lies outside the region a model was computed on."""


class NumericError(IcinError, ArithmeticError):
    """A computation produced a non-finite value."""


class QuadratureError(NumericError):
    """A grid integrand was not finite."""


class InfeasibleError(IcinError):
    """A model cannot reproduce the observed-data distribution."""

    def __init__(self, message, masses=None, cell=None, value=None):
        super().__init__(message)
        self.masses = masses
        self.cell = cell
        self.value = value


class DegenerateError(InfeasibleError):
    """A closed-form solution is undefined because its system is singular."""
