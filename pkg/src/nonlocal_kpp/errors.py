"""Exception types raised by the solvers."""

from __future__ import annotations


class ParameterError(ValueError):
    """A problem parameter violates its precondition (a > 0, D > 0, ...)."""


class InvalidResolutionError(ValueError):
    pass


class DimensionError(ValueError):
    """An array does not match the grid it is used with."""


class DomainError(ValueError):
    """A closed form or asymptotic construction is used outside its range of validity."""


class ConvergenceError(RuntimeError):
    """Newton iteration did not reach the residual tolerance.

    The last iterate and its residual norm are kept so callers can inspect or
    restart from them.
    """

    def __init__(self, message, iterate=None, residual_norm=float("nan"), iterations=0):
        super().__init__(message)
        self.iterate = iterate
        self.residual_norm = residual_norm
        self.iterations = iterations


class SingularJacobianError(ConvergenceError):
    pass


class DegenerateTangentError(ValueError):
    """Two continuation points coincide so no secant direction exists."""


class StallError(RuntimeError):
    """Continuation step size fell below its lower bound."""

    def __init__(self, message, a=float("nan"), ds=float("nan")):
        super().__init__(message)
        self.a = a
        self.ds = ds


class BlowUpError(RuntimeError):
    """Time integration produced non-finite values (or the step size collapsed)."""

    def __init__(self, message, last_state=None):
        super().__init__(message)
        self.last_state = last_state


class TimeStepStallError(BlowUpError):
    """The adaptive time step fell below its floor."""
