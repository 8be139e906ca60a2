from typing import Optional


class GWCritError(Exception):
    """Base class for all errors raised by gwcrit."""


class DomainError(GWCritError, ValueError):
    """Argument outside the domain of a generating function."""


class InvalidOrderError(GWCritError, ValueError):
    """Truncation order too small for the requested series."""


class InvalidFamilyError(GWCritError, ValueError):
    def __init__(self, message: str, index: Optional[int] = None):
        """Offspring law is not a probability distribution."""
        super().__init__(message)
        self.index = index


class PrecisionExhaustedError(GWCritError, ArithmeticError):
    def __init__(self, message: str, max_n: Optional[int] = None):
        """Increments underflowed; `max_n` is the last usable generation."""
        super().__init__(message)
        self.max_n = max_n


class BudgetExceededError(GWCritError, RuntimeError):
    """Series iteration would exceed the configured work budget."""


class QuadratureError(GWCritError, ArithmeticError):
    """Adaptive quadrature did not reach the requested accuracy."""


class UnknownCheckError(GWCritError, KeyError):
    """Requested check is not registered."""


class ConfigError(GWCritError, ValueError):
    """Malformed configuration file or family specification."""
