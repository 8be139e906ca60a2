import jax

# PGF arithmetic needs binary64 throughout.
jax.config.update("jax_enable_x64", True)

from .core import (  # noqa: E402
    TruncSeries,
    binomial_expand,
    compose,
    derivative,
    evaluate,
    multiply,
    power,
    reciprocal,
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
from .family import (  # noqa: E402
    FamilyParams,
    OffspringFamily,
    SVFunction,
    ValidationReport,
    f_eval,
    f_prime_eval,
    lambda_fn,
    L_fn,
    J_fn,
    V_fn,
    rho_fn,
    delta_fn,
    alpha_lambda,
    tail_prob,
    validate_family,
)
from .families import Families, StableFamily, PerturbedFamily  # noqa: E402
from .iteration import (  # noqa: E402
    IterationTrace,
    iterate_scalar,
    iterate_series,
    series_trace,
    U_n,
    Ubar_n,
    psi_n_empirical,
    psi_bracket,
    psi_ratio_residual,
    M_n,
    initial_population,
    survival_from,
)
from .invariant import (  # noqa: E402
    InvariantMeasure,
    U_of,
    U_prime_of,
    u1_of,
    u_coeffs_analytic,
    u_coeffs_empirical,
    abel_residual,
    abel_residual_table,
    integral_form_check,
    normalization_trace,
    stationarity_residuals,
    richardson_u1,
)
from .asymptotics import (  # noqa: E402
    AsymReport,
    Criterion,
    N_nu,
    basic_lemma_check,
    lemma3_check,
    qn_refined,
    thm3_rate_check,
    thm4_local_limit,
    proposition_diagnostic,
    lemma4_check,
)
from .montecarlo import SimConfig, SimResult, simulate, sample_offspring, sample_offspring_batch  # noqa: E402
from .campaign import Campaign, CheckResult, Checks, run  # noqa: E402
from .utils import ReportLog  # noqa: E402
from ._version import __version__  # noqa: E402


__all__ = [
    "Families",
    "Checks",
    "TruncSeries",
    "binomial_expand",
    "compose",
    "derivative",
    "evaluate",
    "multiply",
    "power",
    "reciprocal",
    "GWCritError",
    "DomainError",
    "InvalidOrderError",
    "InvalidFamilyError",
    "PrecisionExhaustedError",
    "BudgetExceededError",
    "QuadratureError",
    "UnknownCheckError",
    "ConfigError",
    "FamilyParams",
    "OffspringFamily",
    "SVFunction",
    "ValidationReport",
    "StableFamily",
    "PerturbedFamily",
    "f_eval",
    "f_prime_eval",
    "lambda_fn",
    "L_fn",
    "J_fn",
    "V_fn",
    "rho_fn",
    "delta_fn",
    "alpha_lambda",
    "tail_prob",
    "validate_family",
    "IterationTrace",
    "iterate_scalar",
    "iterate_series",
    "series_trace",
    "U_n",
    "Ubar_n",
    "psi_n_empirical",
    "psi_bracket",
    "psi_ratio_residual",
    "M_n",
    "initial_population",
    "survival_from",
    "InvariantMeasure",
    "U_of",
    "U_prime_of",
    "u1_of",
    "u_coeffs_analytic",
    "u_coeffs_empirical",
    "abel_residual",
    "abel_residual_table",
    "integral_form_check",
    "normalization_trace",
    "stationarity_residuals",
    "richardson_u1",
    "AsymReport",
    "Criterion",
    "N_nu",
    "basic_lemma_check",
    "lemma3_check",
    "qn_refined",
    "thm3_rate_check",
    "thm4_local_limit",
    "proposition_diagnostic",
    "lemma4_check",
    "SimConfig",
    "SimResult",
    "simulate",
    "sample_offspring",
    "sample_offspring_batch",
    "Campaign",
    "CheckResult",
    "run",
    "ReportLog",
    "__version__",
]
