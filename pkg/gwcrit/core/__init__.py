from .series import (
    TruncSeries,
    binomial_coeffs,
    binomial_expand,
    identity_series,
    multiply,
    compose,
    power,
    reciprocal,
    derivative,
    evaluate,
)
from .errors import (
    GWCritError,
    DomainError,
    InvalidOrderError,
    InvalidFamilyError,
    PrecisionExhaustedError,
    BudgetExceededError,
    QuadratureError,
    UnknownCheckError,
    ConfigError,
)


__all__ = [
    "TruncSeries",
    "binomial_coeffs",
    "binomial_expand",
    "identity_series",
    "multiply",
    "compose",
    "power",
    "reciprocal",
    "derivative",
    "evaluate",
    "GWCritError",
    "DomainError",
    "InvalidOrderError",
    "InvalidFamilyError",
    "PrecisionExhaustedError",
    "BudgetExceededError",
    "QuadratureError",
    "UnknownCheckError",
    "ConfigError",
]
