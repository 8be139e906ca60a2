import math
import jax.numpy as jnp
import numpy as np
import chex
from typing import Dict, Tuple, Union
from flax import struct
from .core.errors import DomainError, InvalidFamilyError, InvalidOrderError
from .core.series import TruncSeries, binomial_coeffs, binomial_coeffs_at, drop_rounding_noise


Real = Union[float, chex.Array]


@struct.dataclass
class FamilyParams:
    validation_depth: int = 10_000
    negative_tol: float = 1e-15
    series_order: int = 512
    mass_eps: float = 1e-12


@struct.dataclass
class ValidationReport:
    coeffs: chex.Array
    min_coefficient: float
    argmin: int
    truncated_mass: float
    tail_bound: float
    mean: float
    critical: bool
    tail_certified: bool
    depth: int = struct.field(pytree_node=False, default=0)

    @property
    def mass_error(self) -> float:
        """Distance of `truncated_mass + tail_bound` from one."""
        return abs(self.truncated_mass + self.tail_bound - 1.0)


class SVFunction(object):
    def __init__(self, nu: float, terms: Tuple[Tuple[float, float], ...]):
        """Slowly varying component L(x) = sum_i w_i x^(-a_i) with a_i >= 0."""
        self.nu = nu
        self.terms = terms

    def __call__(self, x: Real) -> chex.Array:
        x = jnp.asarray(x, dtype=jnp.float64)
        return sum(w * x ** (-a) for w, a in self.terms)

    @property
    def limit(self) -> float:
        """C_L = L(inf-); only the non-decaying terms survive."""
        return math.fsum(w for w, a in self.terms if a == 0.0)

    def ratio(self, lam: Real, x: Real) -> chex.Array:
        return 1.0 + self.alpha(lam, x)

    def alpha(self, lam: Real, x: Real) -> chex.Array:
        """Remainder L(lam x)/L(x) - 1; constant terms cancel exactly."""
        x = jnp.asarray(x, dtype=jnp.float64)
        lam = jnp.asarray(lam, dtype=jnp.float64)
        num = sum(w * x ** (-a) * (lam ** (-a) - 1.0) for w, a in self.terms if a != 0.0)
        return num / self(x)

    def remainder_scaled(self, x: Real) -> chex.Array:
        """|L(x) - C_L| x^nu, bounded under the remainder condition."""
        x = jnp.asarray(x, dtype=jnp.float64)
        return jnp.abs(self(x) - self.limit) * x**self.nu


def _check_interval(name: str, value: Real, lo: float, hi: float, open_lo: bool, open_hi: bool):
    v = np.asarray(value, dtype=np.float64)
    bad_lo = np.any(v <= lo) if open_lo else np.any(v < lo)
    bad_hi = np.any(v >= hi) if open_hi else np.any(v > hi)
    if bad_lo or bad_hi or np.any(np.isnan(v)):
        left = "(" if open_lo else "["
        right = ")" if open_hi else "]"
        raise DomainError(f"{name} must lie in {left}{lo}, {hi}{right}, got {value}.")


class OffspringFamily(object):
    name = "base"

    def __init__(self, nu: float, verbose: bool = False):
        """Base class for a critical offspring law f(s) = s + sum_i w_i (1-s)^e_i."""
        if not 0.0 < nu < 1.0:
            raise DomainError(f"Tail index nu must lie in (0, 1), got {nu}.")
        self.nu = float(nu)
        self.verbose = verbose

    @property
    def default_params(self) -> FamilyParams:
        """Return default validation and series parameters."""
        return self.params_family

    @property
    def params_family(self) -> FamilyParams:
        return FamilyParams()

    @property
    def terms(self) -> Tuple[Tuple[float, float], ...]:
        """Pairs (w_i, e_i) of the expansion around s = 1."""
        raise NotImplementedError

    def certify_tail(self, depth: int) -> bool:
        """Check that coefficients beyond `depth` cannot turn negative."""
        raise NotImplementedError

    def config(self) -> Dict[str, float]:
        raise NotImplementedError

    @property
    def sv(self) -> SVFunction:
        return SVFunction(self.nu, tuple((w, e - 1.0 - self.nu) for w, e in self.terms))

    @property
    def p0(self) -> float:
        return math.fsum(w for w, _ in self.terms)

    @property
    def p1(self) -> float:
        return 1.0 - math.fsum(w * e for w, e in self.terms)

    # Kernels in complement space y = 1 - s; no domain checks, safe under jit.
    def step_y(self, y: Real) -> chex.Array:
        """1 - f(1 - y)."""
        return y - sum(w * y**e for w, e in self.terms)

    def lambda_y(self, y: Real) -> chex.Array:
        return sum(w * y ** (e - 1.0) for w, e in self.terms)

    def fprime_y(self, y: Real) -> chex.Array:
        """f'(1 - y)."""
        return 1.0 - sum(w * e * y ** (e - 1.0) for w, e in self.terms)

    def j_y(self, y: Real) -> chex.Array:
        """J(1 - y) = y Lambda'(y) / Lambda(y)."""
        return sum(w * (e - 1.0) * y ** (e - 1.0) for w, e in self.terms) / self.lambda_y(y)

    def j_minus_nu_y(self, y: Real) -> chex.Array:
        num = sum(w * (e - 1.0 - self.nu) * y ** (e - 1.0) for w, e in self.terms)
        return num / self.lambda_y(y)

    # Public evaluators.
    def f(self, s: Real) -> chex.Array:
        _check_interval("s", s, 0.0, 1.0, False, False)
        s = jnp.asarray(s, dtype=jnp.float64)
        return s + sum(w * (1.0 - s) ** e for w, e in self.terms)

    def f_prime(self, s: Real) -> chex.Array:
        _check_interval("s", s, 0.0, 1.0, False, False)
        return self.fprime_y(1.0 - jnp.asarray(s, dtype=jnp.float64))

    def Lambda(self, y: Real) -> chex.Array:
        _check_interval("y", y, 0.0, 1.0, True, False)
        return self.lambda_y(jnp.asarray(y, dtype=jnp.float64))

    def L(self, x: Real) -> chex.Array:
        _check_interval("x", x, 1.0, math.inf, False, True)
        return self.sv(x)

    def J(self, s: Real) -> chex.Array:
        _check_interval("s", s, 0.0, 1.0, False, True)
        return self.j_y(1.0 - jnp.asarray(s, dtype=jnp.float64))

    def V(self, s: Real) -> chex.Array:
        _check_interval("s", s, 0.0, 1.0, False, True)
        return 1.0 / (self.nu * self.lambda_y(1.0 - jnp.asarray(s, dtype=jnp.float64)))

    def rho(self, s: Real) -> chex.Array:
        _check_interval("s", s, 0.0, 1.0, False, True)
        return jnp.abs(self.j_minus_nu_y(1.0 - jnp.asarray(s, dtype=jnp.float64)))

    def delta(self, y: Real) -> chex.Array:
        _check_interval("y", y, 0.0, 1.0, True, False)
        return self.j_minus_nu_y(jnp.asarray(y, dtype=jnp.float64)) / self.nu

    def alpha_lambda(self, lam: Real, x: Real) -> chex.Array:
        _check_interval("lam", lam, 0.0, math.inf, True, True)
        _check_interval("x", x, 1.0, math.inf, False, True)
        return self.sv.alpha(lam, x)

    # Coefficient streams.
    def coefficients(self, depth: int) -> chex.Array:
        """p_0, ..., p_{depth-1}."""
        p = sum(w * binomial_coeffs(e, depth - 1) for w, e in self.terms)
        return p.at[1].add(1.0)

    def tail_probs(self, depth: int) -> chex.Array:
        """P(X > k) for k < depth, from the series of (1 - f(s)) / (1 - s)."""
        tail = -sum(w * binomial_coeffs(e - 1.0, depth - 1) for w, e in self.terms)
        return tail.at[0].add(1.0)

    def tail_probs_at(self, k: chex.Array) -> chex.Array:
        """P(X > k) for large k without building a table."""
        return -sum(w * binomial_coeffs_at(e - 1.0, k) for w, e in self.terms)

    def series(self, order: int) -> TruncSeries:
        """PGF series of f truncated at `order`."""
        coeffs = drop_rounding_noise(self.coefficients(order + 1))
        return TruncSeries(coeffs=coeffs, tail_mass=float(self.tail_probs(order + 1)[order]))

    def validate(self, depth: int, params: FamilyParams = None) -> ValidationReport:
        """Check nonnegativity and mass of the first `depth` coefficients."""
        if params is None:
            params = self.default_params
        if depth < 2:
            raise InvalidOrderError(f"Validation depth must be >= 2, got {depth}.")
        p = self.coefficients(depth)
        p_host = np.asarray(p)
        bad = np.nonzero(p_host < -params.negative_tol)[0]
        if bad.size > 0:
            idx = int(bad[0])
            raise InvalidFamilyError(
                f"{type(self).__name__}: p_{idx} = {p_host[idx]:.6g} < 0.", index=idx
            )
        tail = float(self.tail_probs(depth)[depth - 1])
        mean = float(self.fprime_y(0.0))
        report = ValidationReport(
            coeffs=p,
            min_coefficient=float(p_host.min()),
            argmin=int(p_host.argmin()),
            truncated_mass=math.fsum(p_host.tolist()),
            tail_bound=tail,
            mean=mean,
            critical=abs(mean - 1.0) < params.negative_tol,
            tail_certified=bool(self.certify_tail(depth)),
            depth=depth,
        )
        if self.verbose:
            print(
                f"{type(self).__name__}: depth={depth}, min p_k={report.min_coefficient:.3e},"
                f" mass error={report.mass_error:.3e}"
            )
        return report


def f_eval(fam: OffspringFamily, s: Real) -> chex.Array:
    return fam.f(s)


def f_prime_eval(fam: OffspringFamily, s: Real) -> chex.Array:
    return fam.f_prime(s)


def lambda_fn(fam: OffspringFamily, y: Real) -> chex.Array:
    return fam.Lambda(y)


def L_fn(fam: OffspringFamily, x: Real) -> chex.Array:
    return fam.L(x)


def J_fn(fam: OffspringFamily, s: Real) -> chex.Array:
    return fam.J(s)


def V_fn(fam: OffspringFamily, s: Real) -> chex.Array:
    return fam.V(s)


def rho_fn(fam: OffspringFamily, s: Real) -> chex.Array:
    return fam.rho(s)


def delta_fn(fam: OffspringFamily, y: Real) -> chex.Array:
    return fam.delta(y)


def alpha_lambda(fam: OffspringFamily, lam: Real, x: Real) -> chex.Array:
    return fam.alpha_lambda(lam, x)


def tail_prob(fam: OffspringFamily, k: int) -> float:
    return float(fam.tail_probs(k + 1)[k])


def validate_family(fam: OffspringFamily, depth: int) -> ValidationReport:
    return fam.validate(depth)
