import math
import warnings
import numpy as np
import pytest
from gwcrit import (
    BudgetExceededError,
    DomainError,
    M_n,
    PrecisionExhaustedError,
    U_n,
    Ubar_n,
    derivative,
    evaluate,
    initial_population,
    iterate_scalar,
    iterate_series,
    psi_bracket,
    psi_n_empirical,
    psi_ratio_residual,
    series_trace,
    survival_from,
)
from gwcrit.iteration import psi_n_table


def test_iterate_scalar_oracle(stable):
    trace = iterate_scalar(stable, 0.0, 2)
    assert math.isclose(float(trace.Qn[1]), 0.5)
    assert math.isclose(float(trace.Qn[2]), 0.3232233, abs_tol=1e-7)
    assert math.isclose(float(trace.fn0[2]), 0.6767767, abs_tol=1e-7)
    assert math.isclose(float(trace.p1n[2]), 0.1174175, abs_tol=1e-7)
    assert not trace.truncated


def test_iterate_scalar_monotone(fam):
    trace = iterate_scalar(fam, 0.3, 1000)
    q = np.asarray(trace.Qn)
    assert q[0] == 1.0
    assert np.all(np.diff(q) < 0.0)
    assert np.all(np.diff(np.asarray(trace.fn_s)) > 0.0)
    assert set(trace.columns()) == {"n", "fn0", "Qn", "p1n", "fn_s", "dfn_s"}


def test_iterate_scalar_domain(stable):
    with pytest.raises(DomainError):
        iterate_scalar(stable, 1.0, 5)
    with pytest.raises(DomainError):
        iterate_scalar(stable, 0.0, 0)


def test_series_one_step(fam):
    series = iterate_series(fam, 1, 16)
    assert np.allclose(np.asarray(series.coeffs), np.asarray(fam.coefficients(17)), atol=1e-15)


def test_series_two_steps(stable):
    series = iterate_series(stable, 2, 64)
    assert math.isclose(float(series.coeffs[0]), 0.6767767, abs_tol=1e-7)
    assert math.isclose(float(series.coeffs[1]), 0.1174175, abs_tol=1e-7)


def test_series_matches_scalar(fam):
    series = iterate_series(fam, 20, 16)
    trace = iterate_scalar(fam, 0.0, 20)
    assert math.isclose(float(series.coeffs[0]), float(trace.fn0[20]), rel_tol=1e-12)
    assert math.isclose(float(series.coeffs[1]), float(trace.p1n[20]), rel_tol=1e-10)


def test_series_mass(fam):
    series = iterate_series(fam, 20, 512)
    assert series.check_mass()
    assert np.all(np.asarray(series.coeffs) >= 0.0)


def test_series_trace_rows(stable):
    rows = series_trace(stable, [1, 5, 20], 32)
    assert rows.shape == (3, 33)
    assert np.allclose(rows[2], np.asarray(iterate_series(stable, 20, 32).coeffs), atol=1e-15)


def test_series_budget(stable):
    with pytest.raises(BudgetExceededError):
        iterate_series(stable, 10, 512, budget=1000)


def test_initial_population(stable):
    series = iterate_series(stable, 1, 16)
    two = initial_population(series, 2)
    assert math.isclose(float(two.coeffs[0]), 0.25)
    assert math.isclose(float(two.coeffs[1]), 2 * 0.5 * 0.25)
    trace = iterate_scalar(stable, 0.0, 2)
    assert math.isclose(float(survival_from(trace, 2)[1]), 0.75)
    with pytest.raises(DomainError):
        initial_population(series, 0)


def test_U_n(stable):
    assert math.isclose(U_n(stable, 0.5, 1), 1.0)
    trace = iterate_scalar(stable, 0.5, 50)
    # f(0) = 1/2 for this family, so f_n(1/2) = f_{n+1}(0) and U_n(1/2) = 1.
    for n in (1, 5, 50):
        assert math.isclose(U_n(stable, 0.5, n, trace), 1.0, rel_tol=1e-9)


def test_U_n_zero(fam):
    assert U_n(fam, 0.0, 10) == 0.0
    assert M_n(fam, 0.0, 10) == 0.0


def test_U_n_vs_Ubar_n(stable):
    trace = iterate_scalar(stable, 0.5, 1000)
    gaps = [abs(U_n(stable, 0.5, n, trace) - Ubar_n(stable, 0.5, n, trace)) for n in (10, 100, 1000)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 1e-2


def test_U_n_beyond_trace(stable):
    trace = iterate_scalar(stable, 0.5, 5)
    with pytest.raises(PrecisionExhaustedError) as exc:
        U_n(stable, 0.5, 10, trace)
    assert exc.value.max_n == 5


def test_psi_n(stable):
    assert math.isclose(psi_n_empirical(stable, 0.0, 1), 0.7071068, abs_tol=1e-7)
    assert math.isclose(psi_bracket(stable, 0.0, 1), 0.5322887, abs_tol=1e-7)


def test_psi_bracket_holds(fam):
    for s in (0.0, 0.25, 0.5, 0.9):
        table = psi_n_table(fam, iterate_scalar(fam, s, 100))
        assert np.all(table["psi"] <= 1.0 + 1e-12)
        assert np.all(table["psi"] >= table["psi_lower"] - 1e-12)


def test_psi_ratio_residual_constant_J(stable):
    # J is constant for the stable family, so the residual is psi_n - 1.
    for n in (1, 10, 100):
        res = psi_ratio_residual(stable, 0.5, n)
        assert math.isclose(res, psi_n_empirical(stable, 0.5, n) - 1.0, abs_tol=1e-14)


def test_nM_n_limit(stable):
    n = 10**4
    assert abs(n * M_n(stable, 0.5, n) - 1.0) <= 5e-3


@pytest.mark.parametrize("n", [1, 10, 50, 200])
def test_series_encloses_scalar(fam, n):
    series = iterate_series(fam, n, 512)
    for x in (0.0, 0.25, 0.5, 0.75):
        trace = iterate_scalar(fam, x, n)
        value = float(trace.fn0[n] if x == 0.0 else trace.fn_s[n])
        lo, hi = evaluate(series, x)
        assert lo <= value <= hi
        assert hi - lo < 1e-10


@pytest.mark.parametrize("n", [1, 10, 50, 200])
def test_derivative_product(fam, n):
    slope = derivative(iterate_series(fam, n, 16))
    trace = iterate_scalar(fam, 0.0, n)
    assert math.isclose(float(slope.coeffs[0]), float(trace.dfn_s[n]), rel_tol=1e-10)
    assert math.isclose(float(trace.dfn_s[n]), float(trace.p1n[n]), rel_tol=1e-14)


def test_survival_from_start_is_silent(stable):
    trace = iterate_scalar(stable, 0.0, 5)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        q2 = survival_from(trace, 2)
    assert q2[0] == 1.0
    assert math.isclose(float(q2[1]), 0.75)
