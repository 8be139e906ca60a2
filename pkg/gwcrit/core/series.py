import math
import jax
import jax.scipy.special
import jax.numpy as jnp
import numpy as np
import chex
from typing import Optional, Tuple
from functools import partial
from flax import struct
from .errors import DomainError, InvalidOrderError


ROUNDING_TOL = 1e-9
EPS = float(np.finfo(np.float64).eps)


@struct.dataclass
class TruncSeries:
    """Power series truncated at order K with a bound on the dropped mass.

    In PGF mode (`pgf=True`) every coefficient is a probability and
    `tail_mass` bounds the sum of the coefficients beyond K. In signed mode
    `tail_mass` bounds the absolute sum of the dropped coefficients. When
    `exact` is False the retained coefficients are only lower bounds and
    `tail_mass` also covers their deficit.
    """

    coeffs: chex.Array
    tail_mass: float = 0.0
    pgf: bool = struct.field(pytree_node=False, default=True)
    exact: bool = struct.field(pytree_node=False, default=True)

    @property
    def order(self) -> int:
        return int(self.coeffs.shape[0]) - 1

    def signs(self) -> chex.Array:
        return jnp.sign(self.coeffs)

    def magnitudes(self) -> chex.Array:
        return jnp.abs(self.coeffs)

    def mass(self, compensated: bool = True) -> float:
        """Sum of the retained coefficients."""
        if compensated:
            return math.fsum(np.asarray(self.coeffs, dtype=np.float64).tolist())
        return float(jnp.sum(self.coeffs))

    def abs_mass(self) -> float:
        return math.fsum(np.abs(np.asarray(self.coeffs, dtype=np.float64)).tolist())

    def check_mass(self, total: float = 1.0, eps: float = 1e-12) -> bool:
        """`sum(coeffs) + tail_mass` must bracket the known total mass."""
        lower = self.mass()
        upper = lower + float(self.tail_mass)
        return lower <= total + eps and upper >= total - eps

    def truncate(self, order: int) -> "TruncSeries":
        if order >= self.order:
            return self
        dropped = self.coeffs[order + 1 :]
        extra = math.fsum(np.abs(np.asarray(dropped)).tolist())
        return TruncSeries(
            coeffs=self.coeffs[: order + 1],
            tail_mass=float(self.tail_mass) + extra,
            pgf=self.pgf,
            exact=self.exact,
        )


def drop_rounding_noise(coeffs: chex.Array, tol: float = ROUNDING_TOL) -> chex.Array:
    """Zero negative probabilities that are rounding noise; anything below -tol is a broken law."""
    lowest = float(jnp.min(coeffs))
    assert lowest >= -tol, f"Probability coefficient {lowest:.6g} is below -{tol:g}."
    return jnp.maximum(coeffs, 0.0)


def binomial_coeffs(beta: float, order: int) -> chex.Array:
    """Coefficients of (1-s)^beta up to `order` via the ratio recurrence."""
    k = jnp.arange(1, order + 1, dtype=jnp.float64)
    ratios = (k - 1.0 - beta) / k
    return jnp.concatenate([jnp.ones(1), jnp.cumprod(ratios)])


def binomial_expand(beta: float, order: int) -> TruncSeries:
    """Signed series of (1-s)^beta truncated at `order`."""
    if order < 2:
        raise InvalidOrderError(f"Truncation order must be >= 2, got {order}.")
    coeffs = binomial_coeffs(beta, order)
    if float(beta).is_integer() and 0 <= beta <= order:
        tail = 0.0
    elif beta > 0 and order > beta:
        # Dropped terms share one sign and (1-s)^beta vanishes at s=1.
        tail = abs(math.fsum(np.asarray(coeffs).tolist()))
    else:
        tail = math.inf
    return TruncSeries(coeffs=coeffs, tail_mass=tail, pgf=False)


def identity_series(order: int) -> TruncSeries:
    return TruncSeries(coeffs=jnp.zeros(order + 1).at[1].set(1.0), tail_mass=0.0)


def _bounded_tail(upper_total: float, result: chex.Array) -> float:
    return max(0.0, upper_total - math.fsum(np.abs(np.asarray(result)).tolist()))


def multiply(a: TruncSeries, b: TruncSeries) -> TruncSeries:
    """Product truncated at the smaller order; retained coefficients are exact."""
    order = min(a.order, b.order)
    coeffs = jnp.convolve(a.coeffs[: order + 1], b.coeffs[: order + 1])[: order + 1]
    upper = (a.abs_mass() + float(a.tail_mass)) * (b.abs_mass() + float(b.tail_mass))
    return TruncSeries(
        coeffs=coeffs,
        tail_mass=_bounded_tail(upper, coeffs),
        pgf=a.pgf and b.pgf,
        exact=a.exact and b.exact,
    )


@partial(jax.jit, static_argnums=(2,))
def _horner(outer: chex.Array, inner: chex.Array, order: int) -> chex.Array:
    def body(i, acc):
        k = order - 1 - i
        acc = jnp.convolve(acc, inner)[: order + 1]
        return acc.at[0].add(outer[k])

    acc = jnp.zeros(order + 1).at[0].set(outer[order])
    return jax.lax.fori_loop(0, order, body, acc)


def compose(outer: TruncSeries, inner: TruncSeries) -> TruncSeries:
    """Series of outer(inner(s)) truncated at the smaller order."""
    if float(inner.coeffs[0]) >= 1.0:
        raise DomainError(
            "Inner constant term must lie in [0, 1) for PGF composition,"
            f" got {float(inner.coeffs[0])}."
        )
    order = min(outer.order, inner.order)
    coeffs = _horner(outer.coeffs[: order + 1], inner.coeffs[: order + 1], order)
    # Outer terms beyond `order` still feed low coefficients when inner(0) > 0,
    # so every retained coefficient is a lower bound.
    inner_total = min(1.0, inner.mass() + float(inner.tail_mass))
    _, upper = evaluate(outer, inner_total)
    return TruncSeries(
        coeffs=coeffs,
        tail_mass=_bounded_tail(upper, coeffs),
        pgf=outer.pgf and inner.pgf,
        exact=float(inner.coeffs[0]) == 0.0 and outer.exact and inner.exact,
    )


@jax.jit
def _miller_power(a: chex.Array, beta: float) -> chex.Array:
    order = a.shape[0] - 1
    j = jnp.arange(order + 1)

    def body(k, h):
        valid = (j >= 1) & (j <= k)
        prev = h[jnp.clip(k - j, 0, order)]
        terms = jnp.where(valid, ((beta + 1.0) * j - k) * a * prev, 0.0)
        return h.at[k].set(jnp.sum(terms) / (k * a[0]))

    h = jnp.zeros_like(a).at[0].set(a[0] ** beta)
    return jax.lax.fori_loop(1, order + 1, body, h)


def power(s: TruncSeries, beta: float) -> TruncSeries:
    """Series of s(x)^beta for real beta; requires a positive constant term."""
    if float(s.coeffs[0]) <= 0.0:
        raise DomainError("Real powers need a positive constant term.")
    coeffs = _miller_power(s.coeffs, jnp.float64(beta))
    nonneg_int = float(beta).is_integer() and beta >= 0
    if s.pgf and nonneg_int:
        upper = (s.mass() + float(s.tail_mass)) ** beta
        return TruncSeries(
            coeffs=coeffs, tail_mass=_bounded_tail(upper, coeffs), exact=s.exact
        )
    return TruncSeries(coeffs=coeffs, tail_mass=math.inf, pgf=False)


def reciprocal(s: TruncSeries) -> TruncSeries:
    return power(s, -1.0)


def derivative(s: TruncSeries, tail_bound: Optional[float] = None) -> TruncSeries:
    """Termwise derivative; the tail is unbounded unless `tail_bound` is given."""
    if s.order < 1:
        raise InvalidOrderError("Derivative needs order >= 1.")
    k = jnp.arange(1, s.order + 1, dtype=jnp.float64)
    coeffs = k * s.coeffs[1:]
    if tail_bound is None:
        tail = 0.0 if float(s.tail_mass) == 0.0 else math.inf
    else:
        tail = float(tail_bound)
    return TruncSeries(coeffs=coeffs, tail_mass=tail, pgf=s.pgf, exact=s.exact)


def evaluate(s: TruncSeries, x: float) -> Tuple[float, float]:
    """Interval (lower, upper) enclosing the value of the full series at x."""
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"Series evaluation needs x in [0, 1], got {x}.")
    powers = jnp.asarray(x, dtype=jnp.float64) ** jnp.arange(s.order + 1)
    terms = np.asarray(s.coeffs * powers)
    value = math.fsum(terms.tolist())
    # Powers and products each carry relative error up to (K+1) eps.
    rounding = (s.order + 1) * EPS * math.fsum(np.abs(terms).tolist())
    if float(s.tail_mass) == 0.0 or (s.exact and x == 0.0):
        slack = 0.0
    elif s.exact:
        slack = float(s.tail_mass) * x ** (s.order + 1)
    else:
        slack = float(s.tail_mass)
    if s.pgf:
        return value - rounding, value + slack + rounding
    return value - slack - rounding, value + slack + rounding


def binomial_coeffs_at(beta: float, k: chex.Array) -> chex.Array:
    """Coefficient of s^k in (1-s)^beta for k > beta, via log-gamma."""
    k = jnp.asarray(k, dtype=jnp.float64)
    if float(beta).is_integer() and beta >= 0:
        return jnp.zeros_like(k)
    log_mag = jax.scipy.special.gammaln(k - beta) - jax.scipy.special.gammaln(k + 1.0)
    return jnp.exp(log_mag) / math.gamma(-beta)
