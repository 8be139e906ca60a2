import math
import warnings
import jax
import jax.numpy as jnp
import numpy as np
import chex
from typing import Dict, List, Optional, Sequence, Tuple
from scipy import integrate
from .core.errors import DomainError, PrecisionExhaustedError, QuadratureError
from .core.series import TruncSeries, binomial_coeffs, reciprocal
from .family import OffspringFamily
from .iteration import IterationTrace, iterate_scalar, series_trace
from .utils.helpers import richardson


ANALYTIC = "analytic-from-V"
EMPIRICAL = "empirical-limit"


def _check_open_unit(s: float):
    if not 0.0 <= s < 1.0:
        raise DomainError(f"s must lie in [0, 1) (pole at s = 1), got {s}.")


def U_of(fam: OffspringFamily, s: float) -> float:
    """U(s) = V(s) - V(0) with V(s) = 1 / (nu Lambda(1-s))."""
    _check_open_unit(s)
    return float(fam.V(s) - fam.V(0.0))


def U_prime_of(fam: OffspringFamily, s: float) -> float:
    """U'(s) = J(s) V(s) / (1 - s)."""
    _check_open_unit(s)
    return float(fam.J(s) * fam.V(s) / (1.0 - s))


def u1_of(fam: OffspringFamily) -> float:
    """u_1 = (1 - p_0 - p_1) / (nu p_0^2)."""
    return (1.0 - fam.p0 - fam.p1) / (fam.nu * fam.p0**2)


def lambda_series(fam: OffspringFamily, order: int) -> TruncSeries:
    """Signed series of Lambda(1 - s) around s = 0."""
    coeffs = sum(w * binomial_coeffs(e - 1.0, order) for w, e in fam.terms)
    return TruncSeries(coeffs=coeffs, tail_mass=math.inf, pgf=False)


def u_coeffs_analytic(fam: OffspringFamily, max_index: int, order: Optional[int] = None) -> np.ndarray:
    """Coefficients u_0 = 0, u_1, ..., u_J of V(s) - V(0)."""
    order = max(max_index, 2) if order is None else order
    if max_index > order:
        raise DomainError(f"max_index {max_index} exceeds series order {order}.")
    v = np.asarray(reciprocal(lambda_series(fam, order)).coeffs) / fam.nu
    v[0] = 0.0
    return v[: max_index + 1]


def u_coeffs_empirical(
    fam: OffspringFamily,
    max_index: int,
    n_grid: Sequence[int],
    order: Optional[int] = None,
    trace: Optional[IterationTrace] = None,
) -> Dict[str, np.ndarray]:
    """u_j(n) = p_j(n) / (f_{n+1}(0) - f_n(0)) on an n-grid; rows follow `n_grid`."""
    n_grid = np.asarray(sorted(int(n) for n in n_grid))
    order = max(max_index, 2) if order is None else order
    if trace is None or trace.n_max < n_grid[-1]:
        trace = iterate_scalar(fam, 0.0, int(n_grid[-1]))
    q = np.asarray(trace.Qn)[n_grid]
    inc = q * np.asarray(fam.lambda_y(jnp.asarray(q)))
    if np.any(inc < 1e-300):
        bad = int(n_grid[np.argmax(inc < 1e-300)])
        raise PrecisionExhaustedError(
            f"u_coeffs_empirical: increment underflow at n={bad}.", max_n=bad - 1
        )
    p = series_trace(fam, n_grid, order)[:, : max_index + 1]
    u = p / inc[:, None]
    u[:, 0] = 0.0
    return {"n": n_grid, "u": u}


def abel_residual(fam: OffspringFamily, s: float, n: int, trace: Optional[IterationTrace] = None) -> float:
    """A_n(s) = U(f_n(s)) - U(s) - n from the closed-form U."""
    _check_open_unit(s)
    if n == 0:
        return 0.0
    trace = trace if trace is not None and trace.n_max >= n else iterate_scalar(fam, s, n)
    return float(abel_residual_table(fam, s, [n], trace)["raw"][0])


def abel_residual_table(
    fam: OffspringFamily, s: float, n_grid: Sequence[int], trace: Optional[IterationTrace] = None
) -> Dict[str, np.ndarray]:
    """Raw A_n, nu A_n (the 1/Lambda form), A_n/ln n and nu A_n/ln(Lambda(1-s) nu n + 1)."""
    _check_open_unit(s)
    n = np.asarray(sorted(int(k) for k in n_grid))
    if trace is None or trace.n_max < n[-1]:
        trace = iterate_scalar(fam, s, max(int(n[-1]), 1))
    y = 1.0 - s
    r = np.asarray(trace.Rn_s)[n]
    scaled = 1.0 / np.asarray(fam.lambda_y(jnp.asarray(r))) - 1.0 / fam.lambda_y(y) - fam.nu * n
    raw = scaled / fam.nu
    with np.errstate(divide="ignore", invalid="ignore"):
        per_log = np.where(n > 1, raw / np.log(n), np.nan)
        per_lemma3 = np.where(
            n > 0, scaled / np.log(fam.lambda_y(y) * fam.nu * n + 1.0), np.nan
        )
    return {
        "n": n,
        "raw": raw,
        "scaled": scaled,
        "per_log": per_log,
        "per_lemma3_log": per_lemma3,
    }


def integral_form_check(
    fam: OffspringFamily, s: float, quad_points: int = 200, tol: float = 1e-12
) -> Dict[str, float]:
    """Integrate psi(y)/((1-y) Lambda(1-y)) over [0, s] with psi = J/nu and compare with U(s).

    The pointwise bracket f'(y) <= psi(y) <= 1 is evaluated on `quad_points`
    nodes; violations are counted and warned about, not raised.
    """
    _check_open_unit(s)

    def integrand(y: float) -> float:
        z = 1.0 - y
        return fam.j_y(z) / (fam.nu * z * fam.lambda_y(z))

    closed = U_of(fam, s)
    if s == 0.0:
        integral, abserr = 0.0, 0.0
    else:
        res = integrate.quad(integrand, 0.0, s, limit=quad_points, epsabs=1e-13, epsrel=1e-12, full_output=1)
        if len(res) > 3:
            raise QuadratureError(f"integral_form_check: quad failed at s={s}: {res[3]}")
        integral, abserr = res[0], res[1]

    y = jnp.linspace(0.0, s, quad_points)
    z = 1.0 - y
    psi = np.asarray(fam.j_y(z) / fam.nu)
    lower = np.asarray(fam.fprime_y(z))
    above = psi > 1.0 + tol
    below = psi < lower - tol
    violations = int(np.sum(above | below))
    if violations > 0:
        warnings.warn(
            f"integral_form_check: bracket f'(y) <= psi(y) <= 1 violated at"
            f" {violations} of {quad_points} nodes (max psi={psi.max():.6g})."
        )
    return {
        "s": float(s),
        "integral": float(integral),
        "closed_form": closed,
        "difference": abs(float(integral) - closed),
        "quad_error": float(abserr),
        "bracket_violations": violations,
        "max_psi": float(psi.max()),
        "min_psi_minus_lower": float((psi - lower).min()),
    }


def normalization_trace(
    fam: OffspringFamily, j_grid: Sequence[int] = (16, 32, 64, 128, 256)
) -> Dict[str, np.ndarray]:
    """Partial sums of u_k p_0^k over a J-grid, with the closed-form limit U(p_0)."""
    j_grid = np.asarray(sorted(int(j) for j in j_grid))
    u = u_coeffs_analytic(fam, int(j_grid[-1]))
    terms = u * fam.p0 ** np.arange(u.shape[0])
    sums = np.asarray([math.fsum(terms[: j + 1].tolist()) for j in j_grid])
    return {"J": j_grid, "sum": sums, "limit": U_of(fam, fam.p0)}


def _transition_rows(fam: OffspringFamily, max_index: int, max_k: int) -> chex.Array:
    """Rows [s^j] f(s)^k for k = 1..max_k and j <= max_index."""
    f = jnp.asarray(fam.series(max(max_index, 2)).coeffs[: max_index + 1])

    def step(acc, _):
        acc = jnp.convolve(acc, f)[: max_index + 1]
        return acc, acc

    start = jnp.zeros(max_index + 1).at[0].set(1.0)
    _, rows = jax.lax.scan(step, start, None, length=max_k)
    return rows


def stationarity_residuals(fam: OffspringFamily, max_index: int = 16, truncation: int = 256) -> np.ndarray:
    """r_j = u_j - sum_{k <= J} u_k P_kj(1) for j = 1..max_index."""
    u = u_coeffs_analytic(fam, truncation)
    rows = np.asarray(_transition_rows(fam, max_index, truncation))
    pushed = np.einsum("k,kj->j", u[1:], rows)
    return u[1 : max_index + 1] - pushed[1:]


def richardson_u1(fam: OffspringFamily, n_grid: Sequence[int], trace: Optional[IterationTrace] = None) -> Dict[str, float]:
    """Two-point Richardson extrapolation in 1/n of u_1(n) on a doubling grid."""
    n = np.asarray(sorted(int(k) for k in n_grid))
    if n.size < 3 or np.any(n[1:] != 2 * n[:-1]):
        raise DomainError("richardson_u1 needs at least three points of a doubling grid.")
    if trace is None or trace.n_max < n[-1]:
        trace = iterate_scalar(fam, 0.0, int(n[-1]))
    q = np.asarray(trace.Qn)[n]
    u = np.asarray(trace.p1n)[n] / (q * np.asarray(fam.lambda_y(jnp.asarray(q))))
    extrap = richardson(u)
    closed = u1_of(fam)
    return {
        "u1_last": float(u[-1]),
        "u1_extrapolated": float(extrap[-1]),
        "error_bar": float(abs(extrap[-1] - extrap[-2])),
        "u1_analytic": closed,
        "relative_deviation": float((extrap[-1] - closed) / closed),
    }


class InvariantMeasure(object):
    def __init__(self, fam: OffspringFamily, max_index: int = 16):
        """Closed-form invariant measure U = V - V(0) of a family."""
        self.fam = fam
        self.max_index = max_index
        self.u1 = u1_of(fam)
        self.u_coeffs = u_coeffs_analytic(fam, max_index)

    def U(self, s: float) -> float:
        return U_of(self.fam, s)

    def U_prime(self, s: float) -> float:
        return U_prime_of(self.fam, s)

    def coefficients(self, n: Optional[int] = None) -> Tuple[np.ndarray, List[str]]:
        """Analytic u_j, or empirical u_j(n) when a generation is given."""
        if n is None:
            return self.u_coeffs, [ANALYTIC] * self.u_coeffs.shape[0]
        emp = u_coeffs_empirical(self.fam, self.max_index, [n])["u"][0]
        return emp, [EMPIRICAL] * emp.shape[0]
