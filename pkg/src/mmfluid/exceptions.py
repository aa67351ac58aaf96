"""Exception hierarchy shared by the solvers and the command line."""


class FluidError(Exception):
    """Base class for every error raised by mmfluid."""


class ModelValidationError(FluidError, ValueError):
    """The model document or matrices do not describe a valid fluid model."""


class RegimeError(FluidError, ValueError):
    """The requested quantity does not exist in the model's drift regime."""


class NumericalError(FluidError, RuntimeError):
    """A numerical kernel failed or produced an inconsistent result."""


class ConvergenceError(NumericalError):
    """An iterative solver exhausted its iteration budget."""

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class SingularPencilError(NumericalError):
    """A Sylvester equation has (numerically) no unique solution."""
