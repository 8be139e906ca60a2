import math
import jax.numpy as jnp
import numpy as np
import pytest
from gwcrit import (
    DomainError,
    Families,
    InvalidFamilyError,
    J_fn,
    L_fn,
    V_fn,
    alpha_lambda,
    delta_fn,
    f_eval,
    f_prime_eval,
    lambda_fn,
    rho_fn,
    tail_prob,
    validate_family,
)
from gwcrit.core.series import drop_rounding_noise


def test_families_registry():
    assert set(Families) == {"stable", "perturbed"}


def test_f_eval(stable, perturbed):
    assert math.isclose(float(f_eval(stable, 0.0)), 0.5)
    assert math.isclose(float(f_eval(stable, 0.5)), 0.6767767, abs_tol=1e-7)
    assert math.isclose(float(f_eval(perturbed, 0.0)), 0.48)
    with pytest.raises(DomainError):
        f_eval(stable, 1.5)


def test_f_prime_critical(fam):
    assert math.isclose(float(f_prime_eval(fam, 1.0)), 1.0)
    assert math.isclose(float(f_prime_eval(fam, 0.0)), fam.p1)


def test_lambda(stable, perturbed):
    assert math.isclose(float(lambda_fn(stable, 1.0)), 0.5)
    assert math.isclose(float(lambda_fn(stable, 0.5)), 0.3535534, abs_tol=1e-7)
    assert math.isclose(float(lambda_fn(perturbed, 1.0)), 0.48)
    with pytest.raises(DomainError):
        lambda_fn(stable, 0.0)


def test_identity_f_minus_s(fam):
    s = jnp.linspace(0.0, 0.99, 50)
    assert jnp.allclose(fam.f(s) - s, (1.0 - s) * fam.Lambda(1.0 - s), atol=1e-15)


def test_J(stable, perturbed):
    s = jnp.array([0.0, 0.3, 0.9])
    assert jnp.allclose(J_fn(stable, s), 0.5)
    assert math.isclose(float(J_fn(perturbed, 0.0)), 0.5833333, abs_tol=1e-7)
    assert abs(float(J_fn(perturbed, 1.0 - 1e-10)) - 0.5) <= 2e-6


def test_karamata_ratio(fam):
    assert abs(float(fam.j_y(1e-8)) - fam.nu) <= 1e-4


def test_V(stable, perturbed):
    assert math.isclose(float(V_fn(stable, 0.0)), 4.0)
    assert math.isclose(float(V_fn(stable, 0.5)), 5.6568542, abs_tol=1e-7)
    assert math.isclose(float(V_fn(perturbed, 0.0)), 4.1666667, abs_tol=1e-7)
    with pytest.raises(DomainError):
        V_fn(stable, 1.0)


def test_rho(stable, perturbed):
    assert float(rho_fn(stable, 0.9)) == 0.0
    assert math.isclose(float(rho_fn(perturbed, 0.0)), 0.0833333, abs_tol=1e-7)
    s = 1.0 - 1e-6
    ratio = float(rho_fn(perturbed, s)) / (1.0 - s) ** 0.5
    assert abs(ratio / 0.1 - 1.0) <= 0.05


def test_delta(stable, perturbed):
    y = jnp.array([1e-6, 0.1, 1.0])
    assert jnp.allclose(delta_fn(stable, y), 0.0)
    d = np.asarray(delta_fn(perturbed, y))
    assert np.all(d > 0.0)
    assert d[0] < 1e-3


def test_slowly_varying(stable, perturbed):
    assert stable.sv.limit == 0.5
    assert math.isclose(perturbed.sv.limit, 0.4)
    assert math.isclose(float(L_fn(perturbed, 100.0)), 0.4 + 0.08 * 0.1)
    assert float(alpha_lambda(stable, 2.0, 100.0)) == 0.0
    assert math.isclose(float(alpha_lambda(perturbed, 2.0, 100.0)), -0.0057430, rel_tol=1e-4)
    ratios = np.asarray(perturbed.sv.ratio(3.0, jnp.array([1e2, 1e6, 1e10])))
    assert np.all(np.diff(np.abs(ratios - 1.0)) < 0.0)


def test_coefficients(stable, perturbed):
    assert jnp.allclose(stable.coefficients(4), jnp.array([0.5, 0.25, 0.1875, 0.03125]))
    assert jnp.allclose(perturbed.coefficients(3), jnp.array([0.48, 0.24, 0.23]))


def test_validate(fam):
    report = validate_family(fam, 10_000)
    assert report.critical
    assert report.tail_certified
    assert report.min_coefficient >= 0.0
    assert report.mass_error <= 1e-10
    assert report.depth == 10_000


def test_invalid_stable_scale():
    with pytest.raises(InvalidFamilyError) as exc:
        Families["stable"](nu=0.5, c=0.8)
    assert exc.value.index == 1
    assert "p_1" in str(exc.value)
    edge = Families["stable"](nu=0.5, c=1.0 / 1.5)
    assert abs(edge.p1) <= 1e-15
    assert float(edge.validate(100).min_coefficient) >= -1e-15


def test_series_rejects_negative_coefficients():
    noisy = jnp.array([0.5, -1e-17, 0.5])
    assert float(drop_rounding_noise(noisy)[1]) == 0.0
    with pytest.raises(AssertionError):
        drop_rounding_noise(jnp.array([1.2, -0.2]))


def test_invalid_perturbation():
    with pytest.raises(InvalidFamilyError) as exc:
        Families["perturbed"](nu=0.5, c=0.4, d=-0.9)
    assert exc.value.index == 2


def test_domain_errors():
    with pytest.raises(DomainError):
        Families["stable"](nu=1.0, c=0.5)
    with pytest.raises(DomainError):
        Families["stable"](nu=0.5, c=-0.1)


def test_tail_prob(fam):
    assert math.isclose(tail_prob(fam, 0), 1.0 - fam.p0)
    assert math.isclose(tail_prob(fam, 1), 1.0 - fam.p0 - fam.p1)
    table = float(fam.tail_probs(101)[100])
    closed = float(fam.tail_probs_at(100.0))
    assert math.isclose(table, closed, rel_tol=1e-10)


def test_derivative_identity(fam):
    s = np.linspace(0.01, 0.99, 99)
    y = 1.0 - s
    h = y * 1e-6
    dlam = (np.asarray(fam.Lambda(y + h)) - np.asarray(fam.Lambda(y - h))) / (2.0 * h)
    slope = 1.0 - np.asarray(fam.f_prime(s))
    assert np.all(slope > 0.0)
    assert np.max(np.abs(slope - np.asarray(fam.Lambda(y)) - y * dlam) / slope) <= 1e-6


def test_remainder_bounded(stable, perturbed):
    x = np.geomspace(10.0, 1e8, 57)
    assert np.all(np.asarray(stable.sv.remainder_scaled(x)) == 0.0)
    assert np.allclose(np.asarray(perturbed.sv.remainder_scaled(x)), 0.08, rtol=1e-9)


def test_coefficient_tail_regularly_varying(stable):
    p = np.asarray(stable.coefficients(100_001))
    k = np.unique(np.geomspace(1e3, 1e5, 41).astype(np.int64))
    scaled = p[k] * k**2.5
    limit = 0.5 / abs(math.gamma(-1.5))
    assert math.isclose(limit, 0.2115711, abs_tol=1e-7)
    assert np.all(np.diff(scaled) < 0.0)
    assert np.all(np.abs(scaled - limit) <= 1e-3)
    assert abs(scaled[-1] - limit) <= 1e-5
