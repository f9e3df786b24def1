"""Exception types shared across the library."""


class IclLabError(Exception):
    """Base class for all library errors."""


class NumericalError(IclLabError):
    """A dense-linear-algebra routine failed (decomposition, non-convergence)."""


class SingularityError(NumericalError):
    """A matrix that must be invertible is singular to working precision."""


class DomainError(IclLabError):
    """Input violates a mathematical precondition (e.g. covariance not PSD)."""


class DivergenceError(IclLabError):
    """An iteration blew up past the overflow guard.

    Carries the step index at which the overflow was detected and, when a
    trainer raises it, the last stable iterate.
    """

    def __init__(self, message: str, step: int | None = None, last_stable=None):
        super().__init__(message)
        self.step = step
        self.last_stable = last_stable


class PoleError(IclLabError):
    """Evaluation requested at (or too close to) a pole of the theory formulas."""


class ConfigError(IclLabError):
    """Invalid experiment or trainer configuration."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
