"""Exception types raised across the package."""


class RBFHHDError(Exception):
    """Base class for all package errors."""


class KernelConfigError(RBFHHDError, ValueError):
    """Invalid kernel family or shape parameter."""


class UndefinedDerivativeError(RBFHHDError, ArithmeticError):
    """A kernel derivative is requested where it does not exist."""


class CentreSingularityError(UndefinedDerivativeError):
    """A derivative of an RBF is evaluated at its own centre where the limit is undefined."""


class SampleError(RBFHHDError, ValueError):
    """Malformed or inconsistent sample data."""

    def __init__(self, message, line=None, indices=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
        self.indices = indices


class IllConditionedError(RBFHHDError, ArithmeticError):
    """A linear system could not be solved reliably."""

    def __init__(self, message, condition=None):
        if condition is not None:
            message = f"{message} (condition estimate {condition:.3e})"
        super().__init__(message)
        self.condition = condition


class ConfigurationError(RBFHHDError, ValueError):
    """Inconsistent solver or strategy configuration."""
