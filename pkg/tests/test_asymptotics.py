import math
import numpy as np
import pytest
from gwcrit import (
    AsymReport,
    DomainError,
    N_nu,
    ReportLog,
    basic_lemma_check,
    iterate_scalar,
    lemma3_check,
    lemma4_check,
    proposition_diagnostic,
    qn_refined,
    series_trace,
    thm3_rate_check,
    thm4_local_limit,
)
from gwcrit.utils import geometric_grid


def _criterion(report, name):
    return next(c for c in report.criteria if c.name == name)


def test_N_nu(stable, perturbed):
    q = np.array([0.5, 1e-3, 1e-9])
    assert np.allclose(N_nu(stable, q), 4.0)
    assert abs(float(N_nu(perturbed, np.array([1e-12]))[0]) - 6.25) <= 1e-5


def test_N_nu_rate(perturbed):
    # N_nu(n) approaches 6.25 from below, within O(n^(-nu)).
    trace = iterate_scalar(perturbed, 0.0, 10**4)
    n = np.array([10, 100, 1000, 10**4])
    gap = np.abs(N_nu(perturbed, np.asarray(trace.Qn)[n]) - 6.25) * np.sqrt(n)
    assert np.all(gap < 10.0)
    assert np.all(np.diff(gap / np.sqrt(n)) < 0.0)


def test_basic_lemma_product(stable, long_horizon):
    report = basic_lemma_check(stable, 0.0, geometric_grid(10, long_horizon))
    assert report.passed
    assert abs(float(report.lhs[-1]) - 1.0) <= 1e-2
    assert np.all(np.asarray(report.extras["calU"]) == 0.0)
    assert np.allclose(report.residual, np.asarray(report.lhs) - 1.0)


def test_basic_lemma_calU(stable):
    report = basic_lemma_check(stable, 0.5, geometric_grid(10, 10**4))
    # The implied U_n(1/2) tends to one here, so the closed-form target stays a diagnostic.
    assert abs(float(report.extras["calU"][-1]) - 1.0) <= 1e-2
    crit = _criterion(report, "basic_lemma.calU_limit")
    assert not crit.hard
    assert report.passed


def test_lemma3(stable, long_horizon):
    report = lemma3_check(stable, 0.0, geometric_grid(1, long_horizon))
    assert report.passed
    assert abs(float(report.normalized[-1])) <= 0.02
    sigma = np.asarray(report.extras["sigma"])
    assert np.all(np.isfinite(sigma))
    assert np.allclose(sigma, report.residual)


def test_qn_refined(stable):
    n = 10**4
    value, report = qn_refined(stable, n)
    q = float(iterate_scalar(stable, 0.0, n).Qn[n])
    assert abs(value / q - 1.0) <= 1e-2
    assert int(report.n[-1]) == n
    with pytest.raises(DomainError):
        qn_refined(stable, 0)


def test_qn_log_slope(stable, long_horizon):
    _, report = qn_refined(stable, long_horizon)
    target = report.fit["target_slope"]
    assert target == 3.0
    assert abs(report.fit["slope"] - target) <= 0.15 * target


def test_thm3_first_generation(stable):
    report = thm3_rate_check(stable, 0.0, list(range(1, 9)))
    assert math.isclose(float(report.lhs[0]), 1.4142136, abs_tol=1e-7)
    assert math.isclose(float(report.extras["e_n"][0]), -0.2928932, abs_tol=1e-7)


def test_thm3_converges(stable):
    report = thm3_rate_check(stable, 0.0, geometric_grid(10, 10**4))
    assert _criterion(report, "thm3.converges").passed
    assert abs(float(report.lhs[-1]) - 0.96917) <= 1e-2
    assert not _criterion(report, "thm3.limit").hard


def test_thm4_local_limit(stable, long_horizon):
    report = thm4_local_limit(stable, geometric_grid(2, long_horizon))
    assert report.passed
    assert abs(report.fit["intercept"] + 0.5154) <= 1e-2
    assert report.fit["target_slope"] == -4.5
    summary = report.summary()
    assert summary["fitted_slope"] == report.fit["slope"]
    assert not _criterion(report, "thm4.limit_is_u1").passed


def test_proposition_matches_thm4(stable):
    grid = [10, 20, 50, 100, 200, 500]
    prop = proposition_diagnostic(stable, 1, grid, order=16)
    thm4 = thm4_local_limit(stable, grid)
    assert _criterion(prop, "proposition.j1.positive").passed
    assert np.allclose(prop.lhs, thm4.lhs, rtol=1e-9)


def test_proposition_range(stable):
    with pytest.raises(DomainError):
        proposition_diagnostic(stable, 0)
    with pytest.raises(DomainError):
        proposition_diagnostic(stable, 9)


def test_lemma4(stable, perturbed):
    assert lemma4_check(stable).passed
    report = lemma4_check(perturbed)
    assert report.passed
    assert math.isclose(report.fit["limit"], 0.1)


def test_report_csv_roundtrip(stable, tmp_path):
    report = lemma3_check(stable, 0.0, geometric_grid(1, 1000))
    log = ReportLog(str(tmp_path), "csv")
    fname = report.save(log)
    back = AsymReport.from_columns(log.load(fname), quantity="lemma3")
    assert np.array_equal(back.n, report.n)
    assert np.array_equal(back.residual, report.residual)
    assert np.array_equal(back.extras["sigma"], report.extras["sigma"])


def test_proposition_shares_rows(stable):
    grid = [10, 20, 50, 100]
    rows = series_trace(stable, grid, 16)
    for j in (1, 3):
        shared = proposition_diagnostic(stable, j, grid, rows=rows)
        alone = proposition_diagnostic(stable, j, grid, order=16)
        assert np.array_equal(shared.lhs, alone.lhs)
    with pytest.raises(DomainError):
        proposition_diagnostic(stable, 1, grid, rows=rows[:2])
