import math
import warnings
import jax
import jax.numpy as jnp
import numpy as np
import chex
from typing import Dict, Optional, Sequence
from functools import partial
from flax import struct
from .core.errors import BudgetExceededError, DomainError, PrecisionExhaustedError
from .core.series import TruncSeries, _miller_power, drop_rounding_noise, power
from .family import OffspringFamily


DEFAULT_BUDGET = 2**31
TINY = 1e-300


@struct.dataclass
class IterationTrace:
    """Generation-indexed trajectory; entry k describes f_k, k = 0..n_max.

    Complements R_k = 1 - f_k are carried directly so that survival
    probabilities keep full relative precision.
    """

    n: chex.Array
    fn0: chex.Array
    Qn: chex.Array
    p1n: chex.Array
    fn_s: Optional[chex.Array] = None
    dfn_s: Optional[chex.Array] = None
    Rn_s: Optional[chex.Array] = None
    s: float = struct.field(pytree_node=False, default=0.0)
    truncated: bool = struct.field(pytree_node=False, default=False)

    @property
    def n_max(self) -> int:
        return int(self.n[-1])

    def columns(self) -> Dict[str, np.ndarray]:
        """CSV columns `n,fn0,Qn,p1n[,fn_s,dfn_s]`."""
        cols = {
            "n": np.asarray(self.n),
            "fn0": np.asarray(self.fn0),
            "Qn": np.asarray(self.Qn),
            "p1n": np.asarray(self.p1n),
        }
        if self.fn_s is not None:
            cols["fn_s"] = np.asarray(self.fn_s)
        if self.dfn_s is not None:
            cols["dfn_s"] = np.asarray(self.dfn_s)
        return cols


@partial(jax.jit, static_argnums=(0, 2))
def _scan_generations(fam: OffspringFamily, y0: chex.Array, n_max: int):
    def step(carry, _):
        q, p1, r, dr = carry
        p1 = p1 * fam.fprime_y(q)
        dr = dr * fam.fprime_y(r)
        carry = (fam.step_y(q), p1, fam.step_y(r), dr)
        return carry, carry

    one = jnp.float64(1.0)
    init = (one, one, jnp.asarray(y0, dtype=jnp.float64), one)
    _, out = jax.lax.scan(step, init, None, length=n_max)
    return tuple(jnp.concatenate([a[None], b]) for a, b in zip(init, out))


def _first_insignificant(fam: OffspringFamily, r: np.ndarray) -> Optional[int]:
    """Index after which the relative increment Lambda(R) is below 1e3 ulp."""
    lam = np.asarray(fam.lambda_y(jnp.asarray(r)))
    bad = np.nonzero(~(lam >= 1e3 * np.finfo(np.float64).eps))[0]
    return int(bad[0]) if bad.size > 0 else None


def iterate_scalar(
    fam: OffspringFamily,
    s: float = 0.0,
    n_max: int = 1,
    track_derivative: bool = True,
) -> IterationTrace:
    """Trace f_k(0), Q_k, p_1(k) and optionally f_k(s), f_k'(s) for k <= n_max."""
    if n_max < 1:
        raise DomainError(f"n_max must be >= 1, got {n_max}.")
    if not 0.0 <= s < 1.0:
        raise DomainError(f"s must lie in [0, 1), got {s}.")
    q, p1, r, dr = (np.asarray(a) for a in _scan_generations(fam, 1.0 - s, n_max))
    cuts = [i for i in (_first_insignificant(fam, q), _first_insignificant(fam, r)) if i is not None]
    truncated = len(cuts) > 0
    end = min(cuts) + 1 if truncated else n_max + 1
    if truncated:
        warnings.warn(
            f"IterationTrace: loss of significance, trace truncated at n={end - 1}"
            f" (requested {n_max})."
        )
    n = np.arange(end)
    return IterationTrace(
        n=n,
        fn0=1.0 - q[:end],
        Qn=q[:end],
        p1n=p1[:end],
        fn_s=(1.0 - r[:end]) if s > 0.0 else None,
        dfn_s=dr[:end] if track_derivative else None,
        Rn_s=r[:end],
        s=float(s),
        truncated=truncated,
    )


def _needs(trace: IterationTrace, n: int):
    if n > trace.n_max:
        raise PrecisionExhaustedError(
            f"Generation {n} unavailable; trace ends at n={trace.n_max}.",
            max_n=trace.n_max,
        )


def _increments(fam: OffspringFamily, q: np.ndarray) -> np.ndarray:
    """Q_k - Q_{k+1} = Q_k Lambda(Q_k), without cancellation."""
    return q * np.asarray(fam.lambda_y(jnp.asarray(q)))


def _max_usable(inc: np.ndarray) -> int:
    ok = np.nonzero(inc >= TINY)[0]
    return int(ok[-1]) if ok.size > 0 else 0


def U_n(fam: OffspringFamily, s: float, n: int, trace: Optional[IterationTrace] = None) -> float:
    """(f_n(s) - f_n(0)) / (f_{n+1}(0) - f_n(0))."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}.")
    trace = trace if trace is not None else iterate_scalar(fam, s, n)
    _needs(trace, n)
    inc = _increments(fam, np.asarray(trace.Qn))
    if inc[n] < TINY:
        raise PrecisionExhaustedError(
            f"U_n: denominator underflow at n={n}.", max_n=_max_usable(inc)
        )
    return float((trace.Qn[n] - trace.Rn_s[n]) / inc[n])


def Ubar_n(fam: OffspringFamily, s: float, n: int, trace: Optional[IterationTrace] = None) -> float:
    """(f_n(s) - f_n(0)) / (f_n(0) - f_{n-1}(0))."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}.")
    trace = trace if trace is not None else iterate_scalar(fam, s, n)
    _needs(trace, n)
    inc = _increments(fam, np.asarray(trace.Qn))
    if inc[n - 1] < TINY:
        raise PrecisionExhaustedError(
            f"Ubar_n: denominator underflow at n={n}.", max_n=_max_usable(inc) + 1
        )
    return float((trace.Qn[n] - trace.Rn_s[n]) / inc[n - 1])


def psi_n_empirical(fam: OffspringFamily, s: float, n: int, trace: Optional[IterationTrace] = None) -> float:
    """f_n'(s) (1-s) Lambda(1-s) / (R_n(s) Lambda(R_n(s)))."""
    trace = trace if trace is not None else iterate_scalar(fam, s, n)
    _needs(trace, n)
    return float(psi_n_table(fam, trace)["psi"][n - 1])


def psi_bracket(fam: OffspringFamily, s: float, n: int, trace: Optional[IterationTrace] = None) -> float:
    """Lower bound f'(s) / f'(f_n(s)) of psi_n(s)."""
    trace = trace if trace is not None else iterate_scalar(fam, s, n)
    _needs(trace, n)
    return float(psi_n_table(fam, trace)["psi_lower"][n - 1])


def M_n(fam: OffspringFamily, s: float, n: int, trace: Optional[IterationTrace] = None) -> float:
    """1 - Lambda(R_n(s)) / Lambda(Q_n)."""
    trace = trace if trace is not None else iterate_scalar(fam, s, n)
    _needs(trace, n)
    lam_r = fam.lambda_y(trace.Rn_s[n])
    lam_q = fam.lambda_y(trace.Qn[n])
    return float(1.0 - lam_r / lam_q)


def psi_ratio_residual(fam: OffspringFamily, s: float, n: int, trace: Optional[IterationTrace] = None) -> float:
    """psi_n(s) - J(s)/J(f_n(s)); J at f_n(s) is evaluated through R_n(s)."""
    trace = trace if trace is not None else iterate_scalar(fam, s, n)
    _needs(trace, n)
    return float(psi_n_table(fam, trace)["ratio_residual"][n - 1])


def psi_n_table(fam: OffspringFamily, trace: IterationTrace) -> Dict[str, np.ndarray]:
    """Per-generation psi_n, its lower bracket and psi_n - J(s)/J(f_n(s)) for n >= 1."""
    if trace.dfn_s is None:
        raise DomainError("psi_n needs a trace built with track_derivative=True.")
    y = 1.0 - trace.s
    r = jnp.asarray(trace.Rn_s[1:])
    dr = jnp.asarray(trace.dfn_s[1:])
    psi = dr * y * fam.lambda_y(y) / (r * fam.lambda_y(r))
    lower = fam.fprime_y(y) / fam.fprime_y(r)
    ratio_residual = psi - fam.j_y(y) / fam.j_y(r)
    return {
        "n": np.asarray(trace.n[1:]),
        "psi": np.asarray(psi),
        "psi_lower": np.asarray(lower),
        "ratio_residual": np.asarray(ratio_residual),
    }


def normalized_table(fam: OffspringFamily, trace: IterationTrace) -> Dict[str, np.ndarray]:
    """U_n, Ubar_n and M_n for n = 1 .. n_max."""
    q = np.asarray(trace.Qn)
    r = np.asarray(trace.Rn_s)
    inc = _increments(fam, q)
    num = q[1:] - r[1:]
    lam_q = np.asarray(fam.lambda_y(jnp.asarray(q[1:])))
    lam_r = np.asarray(fam.lambda_y(jnp.asarray(r[1:])))
    with np.errstate(divide="ignore", invalid="ignore"):
        return {
            "n": np.asarray(trace.n[1:]),
            "U_n": num / inc[1:],
            "Ubar_n": num / inc[:-1],
            "M_n": 1.0 - lam_r / lam_q,
        }


@partial(jax.jit, static_argnums=(0,))
def _series_step(fam: OffspringFamily, r: chex.Array) -> chex.Array:
    """R_{n+1} = R_n - sum_i w_i R_n^e_i on complement series."""
    return r - sum(w * _miller_power(r, jnp.float64(e)) for w, e in fam.terms)


@partial(jax.jit, static_argnums=(0,))
def _series_iterate(fam: OffspringFamily, r: chex.Array, n: int) -> chex.Array:
    return jax.lax.fori_loop(0, n, lambda _, x: _series_step(fam, x), r)


@partial(jax.jit, static_argnums=(0, 2))
def _series_history(fam: OffspringFamily, r: chex.Array, n: int) -> chex.Array:
    def step(x, _):
        x = _series_step(fam, x)
        return x, x

    _, out = jax.lax.scan(step, r, None, length=n)
    return out


def _complement_identity(order: int) -> chex.Array:
    return jnp.zeros(order + 1).at[0].set(1.0).at[1].set(-1.0)


def _to_pgf(r: chex.Array) -> TruncSeries:
    p = drop_rounding_noise((-r).at[0].add(1.0))
    tail = max(0.0, 1.0 - math.fsum(np.asarray(p).tolist()))
    return TruncSeries(coeffs=p, tail_mass=tail)


def _check_budget(n: int, order: int, budget: int):
    if order < 2:
        raise DomainError(f"Series order must be >= 2, got {order}.")
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}.")
    if n * order**2 > budget:
        raise BudgetExceededError(
            f"Series iteration cost n*K^2 = {n * order**2} exceeds budget {budget}."
        )


def iterate_series(
    fam: OffspringFamily, n: int, order: int = 512, budget: int = DEFAULT_BUDGET
) -> TruncSeries:
    """PGF series of f_n; coefficient j equals p_j(n) for every j <= order."""
    _check_budget(n, order, budget)
    r = _series_iterate(fam, _complement_identity(order), n)
    return _to_pgf(r)


def series_trace(
    fam: OffspringFamily,
    n_list: Sequence[int],
    order: int = 512,
    budget: int = DEFAULT_BUDGET,
) -> np.ndarray:
    """Rows p_.(n) for each n in `n_list`, from one pass to max(n_list)."""
    n_list = [int(n) for n in n_list]
    n_max = max(n_list)
    _check_budget(n_max, order, budget)
    hist = np.asarray(_series_history(fam, _complement_identity(order), n_max))
    rows = -hist[np.asarray(n_list) - 1]
    rows[:, 0] += 1.0
    return np.asarray(drop_rounding_noise(jnp.asarray(rows)))


def initial_population(series: TruncSeries, i: int) -> TruncSeries:
    """Series of [f_n(s)]^i, the law of Z_n started from i individuals."""
    if i < 1:
        raise DomainError(f"Initial population must be >= 1, got {i}.")
    return series if i == 1 else power(series, float(i))


def survival_from(trace: IterationTrace, i: int) -> np.ndarray:
    """Q_n^(i) = 1 - f_n(0)^i, via log1p to keep small survivals accurate."""
    # Q_0 = 1 maps to log(0) = -inf and back to survival 1.
    with np.errstate(divide="ignore"):
        return -np.expm1(i * np.log1p(-np.asarray(trace.Qn)))

