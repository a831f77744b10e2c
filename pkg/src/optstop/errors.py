"""Exception hierarchy shared by all modules."""


class OptStopError(Exception):
    """Base class for all package errors."""


class DomainError(OptStopError, ValueError):
    """A point lies outside the state interval of a function."""


class IntegrabilityError(OptStopError, ArithmeticError):
    """An integral over a finite range diverges or cannot be certified."""


class IndeterminateError(OptStopError, ArithmeticError):
    """An extended-real expression of the form inf - inf was encountered."""


class ShapeError(OptStopError, ValueError):
    """The gain function does not have the one-favorable-region sign pattern."""


class CoefficientError(OptStopError, ValueError):
    """Drift/volatility coefficients violate the non-degeneracy conditions."""


class RootDomainError(OptStopError, ValueError):
    """A level has no root on the requested monotone branch of h."""


class NotSolvable(OptStopError):
    """A two-sided solution was requested for a problem that has none."""


class BracketError(OptStopError):
    """No sign change could be located for a monotone scalar equation."""


class PreconditionError(OptStopError, ValueError):
    """The hypotheses of a construction are not met."""


class NoRoot(OptStopError):
    """Shooting found no sign change of the boundary residual.

    Attributes
    ----------
    report : dict
        Scan diagnostics (window, sampled residuals, tolerances).
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report or {}


class NonConvergent(OptStopError):
    """A limit over expanding intervals did not settle."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])


class ValidationError(OptStopError):
    """A candidate solution failed post-hoc validation."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ProblemFileError(OptStopError, ValueError):
    """A problem file could not be parsed."""
