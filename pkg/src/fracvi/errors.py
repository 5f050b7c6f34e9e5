"""Exception hierarchy shared by all fracvi modules."""


class FracviError(Exception):
    """Base class for library errors."""


class InvalidOrderError(FracviError, ValueError):
    """BDF order outside 1..6."""


class ConfigurationError(FracviError, ValueError):
    """Invalid numeric configuration (step size, fractional order, grid...)."""


class DimensionError(FracviError, ValueError):
    """Array shapes do not agree."""


class DegeneracyError(FracviError, ArithmeticError):
    """A linear system that must be regular turned out singular."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class NewtonError(FracviError, ArithmeticError):
    """Newton iteration failed (max iterations or non-finite residual)."""

    def __init__(self, message, iterations=0, residual=float("nan")):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class StepFailure(FracviError, ArithmeticError):
    """An integrator step could not be solved.

    ``step`` is the index k of the discrete Euler-Lagrange equation that
    failed, ``block`` names the equation block ("init", "main", "inner",
    "start").
    """

    def __init__(self, step, residual, block="main", cause=None):
        super().__init__(
            f"step {step} failed ({block} block), residual {residual:.3e}"
        )
        self.step = step
        self.residual = residual
        self.block = block
        self.cause = cause
