import math
import numpy as np
from typing import Any, Callable, Dict, List, Optional, Tuple
from concurrent.futures import ThreadPoolExecutor
from flax import struct
from .asymptotics import (
    AsymReport,
    Criterion,
    basic_lemma_check,
    lemma3_check,
    lemma4_check,
    proposition_diagnostic,
    qn_refined,
    thm3_rate_check,
    thm4_local_limit,
)
from .core.errors import DomainError, GWCritError, UnknownCheckError
from .family import OffspringFamily
from .invariant import (
    U_of,
    U_prime_of,
    abel_residual_table,
    integral_form_check,
    normalization_trace,
    richardson_u1,
    stationarity_residuals,
    u1_of,
    u_coeffs_analytic,
)
from .iteration import M_n, iterate_scalar, psi_n_table, series_trace
from .montecarlo import SimConfig, simulate
from .utils.helpers import doubling_grid, geometric_grid
from .utils.report_log import ReportLog


@struct.dataclass
class Campaign:
    family: OffspringFamily = struct.field(pytree_node=False)
    checks: Tuple[str, ...] = struct.field(pytree_node=False, default=())
    n_max: int = struct.field(pytree_node=False, default=10**6)
    s_values: Tuple[float, ...] = struct.field(pytree_node=False, default=(0.0, 0.5))
    order: int = struct.field(pytree_node=False, default=512)
    jmax: int = struct.field(pytree_node=False, default=8)
    depth: int = struct.field(pytree_node=False, default=10_000)
    reps: int = struct.field(pytree_node=False, default=10**5)
    seed: int = struct.field(pytree_node=False, default=0)
    out_dir: str = struct.field(pytree_node=False, default="gwcrit_report")
    fmt: str = struct.field(pytree_node=False, default="csv")
    workers: Optional[int] = struct.field(pytree_node=False, default=None)
    verbose: bool = struct.field(pytree_node=False, default=False)


@struct.dataclass
class CheckResult:
    name: str
    columns: Dict[str, Any]
    summary: Dict[str, Any]
    criteria: Tuple[Criterion, ...] = ()

    @property
    def passed(self) -> bool:
        return all(bool(c.passed) for c in self.criteria if c.hard)

    def failures(self) -> List[str]:
        return [c.name for c in self.criteria if c.hard and not c.passed]


def _from_reports(name: str, reports: List[AsymReport], s_values: Optional[List[float]] = None) -> CheckResult:
    """Stack reports into one table; an `s` column is prepended when several s are run."""
    columns: Dict[str, List[np.ndarray]] = {}
    criteria = []
    for i, rep in enumerate(reports):
        cols = rep.columns()
        if s_values is not None:
            cols = {"s": np.full(cols["n"].shape, s_values[i]), **cols}
        for k, v in cols.items():
            columns.setdefault(k, []).append(v)
        for c in rep.criteria:
            label = c.name if s_values is None else f"{c.name}[s={s_values[i]}]"
            criteria.append(c.replace(name=label))
    stacked = {k: np.concatenate(v) for k, v in columns.items()}
    summary = {"reports": [r.summary() for r in reports]}
    if s_values is not None:
        summary["s"] = list(s_values)
    return CheckResult(name=name, columns=stacked, summary=summary, criteria=tuple(criteria))


def check_family(fam: OffspringFamily, c: Campaign) -> CheckResult:
    """Coefficient validity, mass bracket, the f - s and derivative identities, Karamata ratio, remainder bound."""
    report = fam.validate(c.depth)
    s = np.arange(1, 100) / 100.0
    lhs = np.asarray(fam.f(s)) - s
    rhs = (1.0 - s) * np.asarray(fam.Lambda(1.0 - s))
    identity_ok = bool(np.all(np.abs(lhs - rhs) <= 1e-13 * np.abs(rhs) + 1e-15))
    karamata = float(fam.j_y(1e-8))
    y = 1.0 - s
    h = y * 1e-6
    dlam = (np.asarray(fam.lambda_y(y + h)) - np.asarray(fam.lambda_y(y - h))) / (2.0 * h)
    slope = 1.0 - np.asarray(fam.f_prime(s))
    slope_err = float(np.max(np.abs(slope - np.asarray(fam.lambda_y(y)) - y * dlam) / slope))
    remainder = float(np.max(np.asarray(fam.sv.remainder_scaled(np.geomspace(10.0, 1e8, 57)))))
    criteria = (
        Criterion("family.nonnegative", report.min_coefficient >= -1e-15, report.min_coefficient, 0.0),
        Criterion("family.mass_bracket", report.mass_error <= 1e-10, report.mass_error, 1e-10),
        Criterion("family.critical", bool(report.critical), report.mean, 1.0),
        Criterion(
            "family.identity",
            identity_ok,
            float(np.max(np.abs(lhs - rhs) / rhs)),
            1e-13,
            note="f(s) - s against (1-s) Lambda(1-s) on s = 0.01..0.99",
        ),
        Criterion("family.karamata", abs(karamata - fam.nu) <= 1e-4, karamata, fam.nu),
        Criterion(
            "family.derivative_identity",
            slope_err <= 1e-6,
            slope_err,
            1e-6,
            note="1 - f'(s) against Lambda + y Lambda' with a central difference",
        ),
        Criterion(
            "family.remainder_bounded",
            math.isfinite(remainder),
            remainder,
            "finite",
            note="sup |L(x) - C_L| x^nu over x in [10, 1e8]",
        ),
    )
    depth = report.depth
    columns = {
        "k": np.arange(depth),
        "p_k": np.asarray(report.coeffs),
        "tail": np.asarray(fam.tail_probs(depth)),
    }
    summary = {
        "family": fam.config(),
        "depth": depth,
        "min_coefficient": report.min_coefficient,
        "argmin": report.argmin,
        "truncated_mass": report.truncated_mass,
        "tail_bound": report.tail_bound,
        "mass_error": report.mass_error,
        "tail_certified": bool(report.tail_certified),
    }
    return CheckResult("family", columns, summary, criteria)


def check_lemma4(fam: OffspringFamily, c: Campaign) -> CheckResult:
    return _from_reports("lemma4", [lemma4_check(fam)])


def check_basic_lemma(fam: OffspringFamily, c: Campaign) -> CheckResult:
    grid = geometric_grid(10, c.n_max)
    reps = [basic_lemma_check(fam, s, grid) for s in c.s_values]
    return _from_reports("basic_lemma", reps, list(c.s_values))


def check_lemma3(fam: OffspringFamily, c: Campaign) -> CheckResult:
    return _from_reports("lemma3", [lemma3_check(fam, 0.0, geometric_grid(1, c.n_max))])


def check_qn(fam: OffspringFamily, c: Campaign) -> CheckResult:
    value, report = qn_refined(fam, c.n_max)
    result = _from_reports("qn", [report])
    return result.replace(summary={**result.summary, "value": value})


def check_thm2(fam: OffspringFamily, c: Campaign) -> CheckResult:
    """Closed-form U, U' and u_1 against finite differences, the series and the integral form."""
    s = np.array([0.1, 0.25, 0.5, 0.75, 0.9])
    h = 1e-6
    u = np.array([U_of(fam, x) for x in s])
    du = np.array([U_prime_of(fam, x) for x in s])
    fd = np.array([(U_of(fam, x + h) - U_of(fam, x - h)) / (2 * h) for x in s])
    fd_err = float(np.max(np.abs(fd / du - 1.0)))
    integral = [integral_form_check(fam, float(x)) for x in s]
    int_diff = np.array([r["difference"] for r in integral])
    u1 = u1_of(fam)
    u1_series = float(u_coeffs_analytic(fam, 1)[1])
    n_m = min(10**4, c.n_max)
    nm = n_m * M_n(fam, 0.5, n_m)
    u_half = U_of(fam, 0.5)
    criteria = (
        Criterion("thm2.derivative", fd_err <= 1e-6, fd_err, 1e-6, note="U' against central differences of U"),
        Criterion("thm2.u1_series", abs(u1 - u1_series) <= 1e-10 * max(1.0, abs(u1)), u1_series, u1),
        Criterion("thm2.integral_form", float(int_diff.max()) <= 1e-8, float(int_diff.max()), 1e-8),
        Criterion(
            "thm2.nM_n",
            abs(nm / u_half - 1.0) <= 1e-2,
            nm,
            u_half,
            hard=False,
            note=f"n M_n(0.5) at n={n_m} against U(0.5)",
        ),
    )
    columns = {
        "s": s,
        "U": u,
        "U_prime": du,
        "U_prime_fd": fd,
        "integral": np.array([r["integral"] for r in integral]),
        "integral_difference": int_diff,
        "bracket_violations": np.array([r["bracket_violations"] for r in integral]),
    }
    summary = {"u1": u1, "u1_series": u1_series, "nM_n": nm, "U_half": u_half}
    return CheckResult("thm2", columns, summary, criteria)


def check_thm3(fam: OffspringFamily, c: Campaign) -> CheckResult:
    grid = geometric_grid(10, min(10**4, c.n_max))
    reps = [thm3_rate_check(fam, s, grid) for s in c.s_values]
    return _from_reports("thm3", reps, list(c.s_values))


def check_thm4(fam: OffspringFamily, c: Campaign) -> CheckResult:
    return _from_reports("thm4", [thm4_local_limit(fam, geometric_grid(2, c.n_max))])


def check_proposition(fam: OffspringFamily, c: Campaign) -> CheckResult:
    # Coefficient j of f_n only depends on coefficients <= j, so one pass at
    # the campaign order serves every index.
    js = list(range(1, min(max(c.jmax, 2), 8) + 1))
    grid = geometric_grid(10, min(2000, c.n_max))
    rows = series_trace(fam, grid, max(c.order, js[-1]))
    reps = [proposition_diagnostic(fam, j, grid, rows=rows) for j in js]
    result = _from_reports("proposition", reps)
    j_col = np.concatenate([np.full(len(r.n), j) for j, r in zip(js, reps)])
    return result.replace(columns={"j": j_col, **result.columns})


def check_lemma2(fam: OffspringFamily, c: Campaign) -> CheckResult:
    """psi_n bracket f'(s)/f'(f_n(s)) <= psi_n(s) <= 1 on s = 0..0.9, n <= 100."""
    cols: Dict[str, List[np.ndarray]] = {k: [] for k in ("s", "n", "psi", "psi_lower", "ratio_residual")}
    worst_upper, worst_lower = -math.inf, math.inf
    for s in np.arange(10) / 10.0:
        table = psi_n_table(fam, iterate_scalar(fam, float(s), 100))
        worst_upper = max(worst_upper, float(np.max(table["psi"] - 1.0)))
        worst_lower = min(worst_lower, float(np.min(table["psi"] - table["psi_lower"])))
        cols["s"].append(np.full(table["n"].shape, s))
        for k in ("n", "psi", "psi_lower", "ratio_residual"):
            cols[k].append(table[k])
    n_r = min(10**4, c.n_max)
    residual = float(psi_n_table(fam, iterate_scalar(fam, 0.5, n_r))["ratio_residual"][-1])
    criteria = (
        Criterion("lemma2.upper", worst_upper <= 1e-12, worst_upper, 1e-12, note="max psi_n - 1"),
        Criterion("lemma2.lower", worst_lower >= -1e-12, worst_lower, 0.0, note="min psi_n - lower bracket"),
        Criterion(
            "lemma2.ratio_residual",
            abs(residual) <= 1e-3,
            residual,
            1e-3,
            hard=False,
            note=f"psi_n(0.5) - J(0.5)/J(f_n(0.5)) at n={n_r}",
        ),
    )
    columns = {k: np.concatenate(v) for k, v in cols.items()}
    return CheckResult("lemma2", columns, {"ratio_residual": residual}, criteria)


def check_abel(fam: OffspringFamily, c: Campaign) -> CheckResult:
    top = min(10**5, c.n_max)
    table = abel_residual_table(fam, 0.0, geometric_grid(1, top))
    target = 0.5 * (1.0 + fam.nu)
    ratio = float(table["per_lemma3_log"][-1])
    exact = float(np.max(np.abs(table["scaled"])))
    criteria = (
        Criterion(
            "abel.log_ratio",
            abs(ratio / target - 1.0) <= 0.05,
            ratio,
            target,
            note=f"nu A_n(0) / ln(Lambda(1) nu n + 1) at n={top}",
        ),
        Criterion(
            "abel.exact_translation",
            exact <= 1e-8,
            exact,
            0.0,
            hard=False,
            note="max |1/Lambda(R_n) - 1/Lambda(1) - nu n| over the grid",
        ),
    )
    return CheckResult("abel", dict(table), {"log_ratio": ratio, "target": target}, criteria)


def check_invariant(fam: OffspringFamily, c: Campaign) -> CheckResult:
    """Normalization sum, stationarity under doubling of J, and the extrapolated u_1."""
    norm = normalization_trace(fam)
    r1 = stationarity_residuals(fam, 16, 256)
    r2 = stationarity_residuals(fam, 16, 512)
    u = u_coeffs_analytic(fam, 16)
    drift = float(np.max(np.abs(r1 - r2) / np.maximum(1.0, np.abs(u[1:]))))
    rich = richardson_u1(fam, doubling_grid(250, 6))
    gap = abs(float(norm["sum"][-1]) - norm["limit"])
    criteria = (
        Criterion("invariant.normalization_limit", gap <= 1e-10, gap, 1e-10, note="sum u_k p_0^k against U(p_0)"),
        Criterion("invariant.stationarity_stable", drift <= 1e-10, drift, 1e-10, note="J = 256 against J = 512"),
        Criterion(
            "invariant.normalization_one",
            abs(norm["limit"] - 1.0) <= 1e-10,
            norm["limit"],
            1.0,
            hard=False,
            note="U(f(0)) = U(0) + 1 would force U(p_0) = 1",
        ),
        Criterion(
            "invariant.stationary",
            float(np.max(np.abs(r2))) <= 1e-8,
            float(np.max(np.abs(r2))),
            0.0,
            hard=False,
            note="max |u_j - sum_k u_k P_kj(1)|",
        ),
        Criterion(
            "invariant.richardson_u1",
            abs(rich["relative_deviation"]) <= 1e-2,
            rich["u1_extrapolated"],
            rich["u1_analytic"],
            hard=False,
        ),
    )
    columns = {"j": np.arange(1, 17), "u_j": u[1:], "r_j_256": r1, "r_j_512": r2}
    abel = abel_residual_table(fam, 0.0, geometric_grid(1, min(10**4, c.n_max)))
    summary = {
        "invariant": {
            "u1_analytic": u1_of(fam),
            "u_coeffs": u,
            "stationarity_residuals": r2,
            "normalization_sum": float(norm["sum"][-1]),
            "abel_residual_table": [dict(zip(abel, row)) for row in zip(*abel.values())],
        },
        "normalization": {"J": norm["J"], "sum": norm["sum"], "limit": norm["limit"]},
        "richardson_u1": rich,
    }
    return CheckResult("invariant", columns, summary, criteria)


MC_GENERATIONS = (1, 2, 5, 10, 20)
MC_INDICES = (0, 1, 2, 3)


def check_montecarlo(fam: OffspringFamily, c: Campaign) -> CheckResult:
    """Simulated p_j(n) against series iteration in 20 cells; 19 must lie within 4 SE."""
    cfg = SimConfig(
        family=fam,
        horizon=MC_GENERATIONS[-1],
        replicates=c.reps,
        seed=c.seed,
        jmax=max(c.jmax, MC_INDICES[-1]),
        workers=c.workers,
        verbose=c.verbose,
    )
    res = simulate(cfg)
    exact = series_trace(fam, MC_GENERATIONS, max(c.order, MC_INDICES[-1] + 1))
    rows = {k: [] for k in ("n", "j", "p_exact", "p_hat", "stderr", "z")}
    for i, n in enumerate(MC_GENERATIONS):
        for j in MC_INDICES:
            p = float(exact[i, j])
            se = math.sqrt(p * (1.0 - p) / res.used[n])
            p_hat = float(res.p_hat[n, j])
            rows["n"].append(n)
            rows["j"].append(j)
            rows["p_exact"].append(p)
            rows["p_hat"].append(p_hat)
            rows["stderr"].append(se)
            rows["z"].append((p_hat - p) / se if se > 0 else 0.0)
    inside = int(np.sum(np.abs(np.asarray(rows["z"])) <= 4.0))
    criteria = (
        Criterion("montecarlo.cells", inside >= 19, inside, 19, note="cells within 4 binomial SE out of 20"),
        Criterion(
            "montecarlo.capped",
            res.capped <= 1e-3 * c.reps,
            res.capped,
            1e-3 * c.reps,
            hard=False,
            note=f"capped replicates; cap tail mass {res.cap_tail_mass:.3e}",
        ),
    )
    columns = {k: np.asarray(v) for k, v in rows.items()}
    return CheckResult("montecarlo", columns, res.to_json(cfg), criteria)


Checks: Dict[str, Callable[[OffspringFamily, Campaign], CheckResult]] = {
    "family": check_family,
    "lemma4": check_lemma4,
    "basic_lemma": check_basic_lemma,
    "lemma3": check_lemma3,
    "qn": check_qn,
    "thm2": check_thm2,
    "thm3": check_thm3,
    "thm4": check_thm4,
    "proposition": check_proposition,
    "lemma2": check_lemma2,
    "abel": check_abel,
    "invariant": check_invariant,
    "montecarlo": check_montecarlo,
}


def validate_campaign(c: Campaign) -> Campaign:
    checks = tuple(c.checks) if c.checks else tuple(Checks)
    unknown = [k for k in checks if k not in Checks]
    if unknown:
        raise UnknownCheckError(f"Unknown check(s) {unknown}; choose from {sorted(Checks)}.")
    if c.n_max < 10 or not c.s_values or c.order < 2 or c.depth < 2 or c.reps < 1:
        raise DomainError("Campaign grids must be nonempty: n_max >= 10, order/depth >= 2, reps >= 1.")
    return c.replace(checks=checks)


def _run_one(name: str, c: Campaign) -> CheckResult:
    try:
        result = Checks[name](c.family, c)
    except GWCritError as exc:
        crit = Criterion(f"{name}.error", False, type(exc).__name__, None, note=str(exc))
        result = CheckResult(name, {}, {"error": str(exc)}, (crit,))
    if c.verbose:
        print(f"Campaign: {name} {'passed' if result.passed else 'FAILED'}")
    return result


def run_checks(c: Campaign) -> List[CheckResult]:
    """Run the requested checks in parallel; results keep the order of `c.checks`."""
    c = validate_campaign(c)
    with ThreadPoolExecutor(max_workers=c.workers) as pool:
        return list(pool.map(lambda name: _run_one(name, c), c.checks))


def write_results(c: Campaign, results: List[CheckResult]) -> Dict[str, Any]:
    log = ReportLog(c.out_dir, c.fmt, verbose=c.verbose)
    files = {}
    for res in results:
        if res.columns:
            files[res.name] = log.save(res.name, res.columns, {**res.summary, "pass": res.passed})
    criteria = [dict(check=r.name, **k.summary()) for r in results for k in r.criteria]
    summary = {
        "family": c.family.config(),
        "checks": list(c.checks),
        "files": files,
        "summaries": {r.name: r.summary for r in results},
        "criteria": criteria,
        "failed": [name for r in results for name in r.failures()],
        "pass": all(r.passed for r in results),
    }
    log.save_json(summary, log.path("summary", "json"))
    return summary


def run(c: Campaign) -> int:
    """Exit code 0 iff every hard criterion passed; artifacts land in `c.out_dir`."""
    c = validate_campaign(c)
    summary = write_results(c, run_checks(c))
    return 0 if summary["pass"] else 1
