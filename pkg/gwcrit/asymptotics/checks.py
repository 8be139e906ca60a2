import math
import jax.numpy as jnp
import numpy as np
from typing import Optional, Sequence, Tuple
from ..core.errors import DomainError
from ..family import OffspringFamily
from ..invariant import U_of, U_prime_of, u1_of, u_coeffs_analytic
from ..iteration import DEFAULT_BUDGET, IterationTrace, iterate_scalar, series_trace
from ..utils.helpers import (
    geometric_grid,
    log_corrections,
    loglog_slope,
    nested_fit,
    ols,
    top_range,
)
from .report import AsymReport, Criterion, make_report


DEFAULT_NMAX = 10**6
SLOPE_TOLERANCE = 0.15


def _scalar_trace(
    fam: OffspringFamily, s: float, n_grid: Sequence[int], trace: Optional[IterationTrace] = None
) -> Tuple[np.ndarray, IterationTrace]:
    n = np.asarray(sorted(set(int(k) for k in n_grid)), dtype=np.int64)
    if n.size == 0 or n[0] < 1:
        raise DomainError("n-grids must be nonempty and start at n >= 1.")
    if trace is None or trace.n_max < n[-1] or trace.s != s or trace.dfn_s is None:
        trace = iterate_scalar(fam, s, int(n[-1]))
    return n[n <= trace.n_max], trace


def _grid(n_grid: Optional[Sequence[int]], lo: int, hi: int) -> Sequence[int]:
    return geometric_grid(lo, hi) if n_grid is None else n_grid


def _safe_log_ratio(x: np.ndarray, n: np.ndarray) -> np.ndarray:
    """x / ln n, undefined at n = 1."""
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(n > 1, x / np.log(np.maximum(n, 2)), np.nan)


def _nested(name: str, n: np.ndarray, y: np.ndarray, columns: Sequence[str], which: int = 0):
    fit = nested_fit(n, y, columns, which)
    crit = Criterion(
        name=f"{name}.grid_agreement",
        passed=fit["grid_agreement"],
        value=abs(fit["estimate"] - fit["estimate_half"]),
        target=3.0 * (fit["error"] + fit["error_half"]),
        hard=False,
        note="full grid vs every other point",
    )
    return fit, crit


def N_nu(fam: OffspringFamily, q: np.ndarray) -> np.ndarray:
    """L(1/Q_n)^(-1/nu); constant c^(-1/nu) for the stable family."""
    q = np.asarray(q, dtype=np.float64)
    return np.asarray(fam.sv(1.0 / q)) ** (-1.0 / fam.nu)


def basic_lemma_check(
    fam: OffspringFamily,
    s: float = 0.0,
    n_grid: Optional[Sequence[int]] = None,
    trace: Optional[IterationTrace] = None,
) -> AsymReport:
    """Q_n (nu n)^(1/nu) / N_nu(n) -> 1, and the remainder nu n (1 - R_n(s)/Q_n)."""
    n, trace = _scalar_trace(fam, s, _grid(n_grid, 10, DEFAULT_NMAX), trace)
    nu = fam.nu
    q = np.asarray(trace.Qn)[n]
    r = np.asarray(trace.Rn_s)[n]
    scale = (nu * n) ** (1.0 / nu)
    nn = N_nu(fam, q)
    lhs = q * scale / nn
    product_sv = q * scale * np.asarray(fam.sv(scale / nn)) ** (1.0 / nu)
    cal_u = nu * n * (1.0 - r / q)
    extras = {"product_sv": product_sv, "calU": cal_u}

    criteria = [
        Criterion(
            "basic_lemma.product",
            passed=bool(0.99 <= lhs[-1] <= 1.01),
            value=float(lhs[-1]),
            target=[0.99, 1.01],
        )
    ]
    if s == 0.0:
        criteria.append(
            Criterion(
                "basic_lemma.calU_zero",
                passed=bool(np.all(cal_u == 0.0)),
                value=float(np.max(np.abs(cal_u))),
                target=0.0,
            )
        )
    else:
        u = U_of(fam, s)
        rel = abs(cal_u[-1] - u) / u
        criteria.append(
            Criterion(
                "basic_lemma.calU_limit",
                passed=bool(rel <= 0.02),
                value=float(rel),
                target=0.02,
                hard=False,
                note=f"calU_n(s) at n={n[-1]} is {cal_u[-1]:.8g}, closed-form U(s) is {u:.8g}",
            )
        )
    fit = {}
    mask = top_range(n)
    if mask.sum() >= 6:
        fit, agree = _nested("basic_lemma", n[mask], lhs[mask], ["1", "log/n", "1/n"])
        fit["limit"] = fit["estimate"]
        criteria.append(agree)
    report = make_report("basic_lemma", fam.name, n, lhs, 1.0, 0.0, extras=extras, fit=fit)
    return report.with_criteria(*criteria)


def lemma3_check(
    fam: OffspringFamily,
    s: float = 0.0,
    n_grid: Optional[Sequence[int]] = None,
    trace: Optional[IterationTrace] = None,
) -> AsymReport:
    """1/Lambda(R_n(s)) - 1/Lambda(1-s) = nu n + (1+nu)/2 ln(Lambda(1-s) nu n + 1) + rho_n(s)."""
    n, trace = _scalar_trace(fam, s, _grid(n_grid, 1, DEFAULT_NMAX), trace)
    nu = fam.nu
    lam_y = float(fam.lambda_y(1.0 - s))
    r = np.asarray(trace.Rn_s)[n]
    lhs = 1.0 / np.asarray(fam.lambda_y(jnp.asarray(r))) - 1.0 / lam_y
    main = nu * n
    corr = 0.5 * (1.0 + nu) * np.log(lam_y * nu * n + 1.0)
    rho = lhs - main - corr
    per_log = _safe_log_ratio(rho, n)

    # rho_n(s) stays bounded, so it doubles as the bounded part sigma_n(s).
    tail = n >= 100 if np.sum(n >= 100) >= 2 else np.ones_like(n, dtype=bool)
    sub = tail & (n <= n.max() / 10)
    if sub.sum() == 0:
        sub = tail & (n <= np.median(n[tail]))
    sup_full = float(np.max(np.abs(rho[tail])))
    sup_sub = float(np.max(np.abs(rho[sub])))
    stable = math.isfinite(sup_full) and abs(sup_full - sup_sub) <= 0.1 * max(sup_full, 1e-300)

    criteria = [
        Criterion(
            "lemma3.rho_per_log",
            passed=bool(abs(per_log[-1]) <= 0.02),
            value=float(per_log[-1]),
            target=0.02,
        ),
        Criterion(
            "lemma3.sigma_sup_stable",
            passed=bool(stable),
            value=sup_full,
            target=sup_sub,
            note="sup |sigma_n| over n >= 100, full grid vs grid cut one decade earlier",
        ),
    ]
    fit = {}
    mask = top_range(n)
    if mask.sum() >= 6:
        fit, agree = _nested("lemma3", n[mask], rho[mask], ["1", "log/n", "1/n"])
        fit["sigma_limit"] = fit["estimate"]
        criteria.append(agree)
    report = make_report(
        "lemma3", fam.name, n, lhs, main, corr, normalized=per_log, extras={"sigma": rho}, fit=fit
    )
    return report.with_criteria(*criteria)


def qn_refined(
    fam: OffspringFamily,
    n: int,
    n_grid: Optional[Sequence[int]] = None,
    trace: Optional[IterationTrace] = None,
) -> Tuple[float, AsymReport]:
    """Two-term approximation N_nu(n)/(nu n)^(1/nu) (1 - 1/(p_0 nu n)) of Q_n.

    The report runs over a geometric grid ending at `n`; `normalized` is the
    one-term relative error times p_0 nu n.
    """
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}.")
    grid = list(_grid(n_grid, 1, n)) + [n]
    ns, trace = _scalar_trace(fam, 0.0, grid, trace)
    nu, p0 = fam.nu, fam.p0
    q = np.asarray(trace.Qn)[ns]
    main = N_nu(fam, q) / (nu * ns) ** (1.0 / nu)
    corr = -main / (p0 * nu * ns)
    one_term = 1.0 - q / main
    two_term = (main + corr) / q - 1.0
    normalized = one_term * p0 * nu * ns
    target = (1.0 + nu) / (2.0 * nu**2)

    fit = {"target_slope": target}
    criteria = [
        Criterion(
            "qn.one_term_coefficient",
            passed=bool(abs(normalized[-1] - 1.0) <= 0.1),
            value=float(normalized[-1]),
            target=1.0,
            hard=False,
            note="p_0 nu n times the one-term relative error",
        )
    ]
    mask = top_range(ns)
    if mask.sum() >= 4:
        coef, se = ols(log_corrections(ns[mask], ["log/n", "1/n"]), one_term[mask])
        nested, agree = _nested("qn", ns[mask], one_term[mask], ["log/n", "1/n"])
        fit.update(
            slope=float(coef[0]),
            slope_error=float(se[0]),
            intercept=float(coef[1]),
            slope_half=nested["estimate_half"],
            grid_agreement=nested["grid_agreement"],
            tolerance=SLOPE_TOLERANCE,
        )
        criteria += [
            Criterion(
                "qn.log_slope",
                passed=bool(abs(coef[0] - target) <= SLOPE_TOLERANCE * target),
                value=float(coef[0]),
                target=target,
                hard=False,
                note="ln n/n coefficient of 1 - Q_n/main with a 1/n nuisance term",
            ),
            agree,
        ]
    value = float(main[-1] + corr[-1])
    report = make_report(
        "qn",
        fam.name,
        ns,
        q,
        main,
        corr,
        normalized=normalized,
        extras={"rel_error_one": one_term, "rel_error_two": two_term},
        fit=fit,
    )
    return value, report.with_criteria(*criteria)


def thm3_rate_check(
    fam: OffspringFamily,
    s: float = 0.0,
    n_grid: Optional[Sequence[int]] = None,
    trace: Optional[IterationTrace] = None,
) -> AsymReport:
    """U'_n(s) = f_n'(s) / (Q_n Lambda(Q_n)) against the closed form U'(s)."""
    n, trace = _scalar_trace(fam, s, _grid(n_grid, 10, 10**4), trace)
    q = np.asarray(trace.Qn)[n]
    d = np.asarray(trace.dfn_s)[n]
    lhs = d / (q * np.asarray(fam.lambda_y(jnp.asarray(q))))
    main = U_prime_of(fam, s)
    e = lhs / main - 1.0
    ne = n * e

    change = abs(lhs[-1] / lhs[-2] - 1.0) if n.size > 1 else math.inf
    slope = loglog_slope(n, ne)
    criteria = [
        Criterion(
            "thm3.converges",
            passed=bool(change <= 1e-2),
            value=float(change),
            target=1e-2,
            note="relative change of U'_n(s) between the last two grid points",
        ),
        Criterion(
            "thm3.bounded_rate",
            passed=bool(slope <= 0.1),
            value=float(slope),
            target=0.1,
            hard=False,
            note="log-log trend slope of |n e_n|",
        ),
        Criterion(
            "thm3.limit",
            passed=bool(abs(e[-1]) <= 1e-2),
            value=float(e[-1]),
            target=0.0,
            hard=False,
            note=f"U'_n(s) at n={n[-1]} is {lhs[-1]:.8g}, closed-form U'(s) is {main:.8g}",
        ),
    ]
    fit = {"loglog_slope": slope}
    if n.size >= 6:
        nested, agree = _nested("thm3", n, lhs, ["1", "log/n", "1/n"])
        fit.update(limit=nested["estimate"], limit_error=nested["error"], limit_half=nested["estimate_half"])
        criteria.append(agree)
    report = make_report("thm3", fam.name, n, lhs, main, 0.0, normalized=ne, extras={"e_n": e}, fit=fit)
    return report.with_criteria(*criteria)


def thm4_local_limit(
    fam: OffspringFamily,
    n_grid: Optional[Sequence[int]] = None,
    trace: Optional[IterationTrace] = None,
    decades: float = 2.0,
) -> AsymReport:
    """P_nu(n)/(N_nu(n) u_1) with P_nu(n) = (nu n)^((1+nu)/nu) p_1(n).

    The ln n/n coefficient is fitted with regressors [1, ln n/n, 1/n] over the
    top `decades` of the grid and taken relative to the fitted limit.
    """
    n, trace = _scalar_trace(fam, 0.0, _grid(n_grid, 2, DEFAULT_NMAX), trace)
    nu = fam.nu
    q = np.asarray(trace.Qn)[n]
    p1 = np.asarray(trace.p1n)[n]
    nn = N_nu(fam, q)
    u1 = u1_of(fam)
    p_nu = (nu * n) ** ((1.0 + nu) / nu) * p1
    lhs = p_nu / (nn * u1)
    target = -((1.0 + nu) ** 2) / (2.0 * nu**2)
    corr = target * np.log(n) / n
    g = _safe_log_ratio((lhs - 1.0) * n, n)

    mask = top_range(n, decades) & (n > 1)
    cols = ["1", "log/n", "1/n"]
    coef, se = ols(log_corrections(n[mask], cols), lhs[mask] - 1.0)
    limit = 1.0 + coef[0]
    rel_slope = coef[1] / limit
    sub = np.nonzero(mask)[0][::-1][::2][::-1]
    if sub.shape[0] < len(cols):
        sub = np.nonzero(mask)[0]
    coef_h, se_h = ols(log_corrections(n[sub], cols), lhs[sub] - 1.0)
    rel_half = coef_h[1] / (1.0 + coef_h[0])
    err = se[1] / abs(limit)
    err_h = se_h[1] / abs(1.0 + coef_h[0])
    fit = {
        "slope": float(rel_slope),
        "slope_error": float(err),
        "intercept": float(coef[0]),
        "raw_slope": float(coef[1]),
        "limit": float(limit),
        "target_slope": target,
        "tolerance": SLOPE_TOLERANCE,
        "slope_half": float(rel_half),
        "grid_agreement": bool(abs(rel_slope - rel_half) <= 3.0 * (err + err_h) + 1e-12),
    }
    criteria = [
        Criterion(
            "thm4.relative_slope",
            passed=bool(abs(rel_slope - target) <= SLOPE_TOLERANCE * abs(target)),
            value=float(rel_slope),
            target=target,
            note="ln n/n coefficient divided by the fitted limit",
        ),
        Criterion(
            "thm4.limit_is_u1",
            passed=bool(abs(limit - 1.0) <= 1e-2),
            value=float(limit),
            target=1.0,
            hard=False,
            note=f"fitted limit of P_nu/(N_nu u_1) with u_1 = {u1:.8g}",
        ),
        Criterion(
            "thm4.grid_agreement",
            passed=fit["grid_agreement"],
            value=float(abs(rel_slope - rel_half)),
            target=float(3.0 * (err + err_h)),
            hard=False,
            note="full grid vs every other point",
        ),
    ]
    report = make_report(
        "thm4",
        fam.name,
        n,
        lhs,
        1.0,
        corr,
        normalized=g,
        extras={"P_nu": p_nu, "N_nu": nn, "p1": p1},
        fit=fit,
    )
    return report.with_criteria(*criteria)


def proposition_diagnostic(
    fam: OffspringFamily,
    j: int,
    n_grid: Optional[Sequence[int]] = None,
    order: int = 512,
    budget: int = DEFAULT_BUDGET,
    rows: Optional[np.ndarray] = None,
) -> AsymReport:
    """(nu n)^((1+nu)/nu) p_j(n) / (N_nu(n) u_j) from series iteration; j = 1 matches thm4.

    `rows` may carry a precomputed `series_trace` over the same grid, so that
    several indices share one pass.
    """
    if not 1 <= j <= 8:
        raise DomainError(f"j must lie in 1..8, got {j}.")
    n = np.asarray(sorted(set(int(k) for k in _grid(n_grid, 10, 2000))), dtype=np.int64)
    if rows is None:
        rows = series_trace(fam, n, max(order, j, 2), budget)
    elif rows.shape[0] != n.size or rows.shape[1] <= j:
        raise DomainError(f"rows must hold {n.size} generations and index {j}, got shape {rows.shape}.")
    p = rows[:, j]
    trace = iterate_scalar(fam, 0.0, int(n[-1]), track_derivative=False)
    q = np.asarray(trace.Qn)[n]
    nu = fam.nu
    uj = float(u_coeffs_analytic(fam, j)[j])
    p_nu = (nu * n) ** ((1.0 + nu) / nu) * p
    lhs = p_nu / (N_nu(fam, q) * uj)
    mho = _safe_log_ratio((lhs - 1.0) * n, n)

    criteria = [
        Criterion(
            f"proposition.j{j}.positive",
            passed=bool(np.all(p > 0.0)),
            value=float(np.min(p)),
            target=0.0,
        ),
        Criterion(
            f"proposition.j{j}.ratio_limit",
            passed=bool(abs(lhs[-1] - 1.0) <= 0.1),
            value=float(lhs[-1]),
            target=1.0,
            hard=False,
            note=f"u_{j} = {uj:.8g} from the closed form",
        ),
    ]
    fit = {"u_j": uj}
    if n.size >= 6:
        nested, agree = _nested(f"proposition.j{j}", n, lhs - 1.0, ["1", "log/n", "1/n"])
        fit.update(limit=1.0 + nested["estimate"], limit_half=1.0 + nested["estimate_half"])
        criteria.append(agree)
    report = make_report(
        f"proposition_j{j}",
        fam.name,
        n,
        lhs,
        1.0,
        0.0,
        normalized=mho,
        extras={"p_j": p, "P_nu": p_nu},
        fit=fit,
    )
    return report.with_criteria(*criteria)


def rho_rate_limit(fam: OffspringFamily) -> float:
    """lim rho(1-y)/y^nu, fed by the terms whose remainder exponent equals nu."""
    num = sum(w * a for w, a in fam.sv.terms if abs(a - fam.nu) < 1e-12)
    return abs(num) / fam.sv.limit


def lemma4_check(fam: OffspringFamily, points_per_decade: int = 4, min_y: float = 1e-10) -> AsymReport:
    """rho(s)/(1-s)^nu on y = 1-s = 10^(-k/points_per_decade); column `n` holds k."""
    k_max = int(round(-math.log10(min_y) * points_per_decade))
    k = np.arange(0, k_max + 1)
    y = 10.0 ** (-k / points_per_decade)
    rho = np.abs(np.asarray(fam.j_minus_nu_y(jnp.asarray(y))))
    lhs = rho / y**fam.nu
    limit = rho_rate_limit(fam)
    near = k >= points_per_decade
    if limit == 0.0:
        criteria = [
            Criterion("lemma4.rho_zero", passed=bool(np.max(rho) <= 1e-14), value=float(np.max(rho)), target=1e-14)
        ]
    else:
        sup = float(np.max(lhs[near]))
        criteria = [
            Criterion("lemma4.sup_finite", passed=math.isfinite(sup), value=sup, target="finite"),
            Criterion(
                "lemma4.rate_limit",
                passed=bool(abs(lhs[-1] - limit) <= 0.1 * limit),
                value=float(lhs[-1]),
                target=limit,
            ),
        ]
    report = make_report(
        "lemma4",
        fam.name,
        k,
        lhs,
        limit,
        0.0,
        extras={"s": 1.0 - y, "y": y, "rho": rho},
        fit={"limit": limit},
    )
    return report.with_criteria(*criteria)

