"""Exception hierarchy shared by the library and mapped to CLI exit codes."""


class FincorrError(Exception):
    """Base class for all toolkit errors."""


class InputError(FincorrError, ValueError):
    """Bad input data or arguments (CLI exit code 1)."""


class NumericalError(FincorrError, ArithmeticError):
    """A numerical routine failed or met a degenerate case (CLI exit code 2)."""


class ConvergenceError(NumericalError):
    """An iterative solver hit its iteration cap.

    ``residual`` carries the last measured off-diagonal / mismatch norm.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DataWarning(UserWarning):
    """Emitted when rows are dropped or values imputed while loading data."""
