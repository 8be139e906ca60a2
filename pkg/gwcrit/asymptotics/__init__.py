from .report import AsymReport, Criterion, make_report
from .checks import (
    N_nu,
    basic_lemma_check,
    lemma3_check,
    qn_refined,
    thm3_rate_check,
    thm4_local_limit,
    proposition_diagnostic,
    lemma4_check,
    rho_rate_limit,
)


__all__ = [
    "AsymReport",
    "Criterion",
    "make_report",
    "N_nu",
    "basic_lemma_check",
    "lemma3_check",
    "qn_refined",
    "thm3_rate_check",
    "thm4_local_limit",
    "proposition_diagnostic",
    "lemma4_check",
    "rho_rate_limit",
]
