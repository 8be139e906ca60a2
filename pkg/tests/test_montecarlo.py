import math
import jax
import jax.numpy as jnp
import numpy as np
import pytest
from gwcrit import (
    DomainError,
    Families,
    SimConfig,
    iterate_series,
    sample_offspring,
    sample_offspring_batch,
    simulate,
)
from gwcrit.montecarlo import CAPPED
from gwcrit.montecarlo.sampler import SAMPLER_SLOTS, _SAMPLERS, get_sampler


def test_sample_offspring_cdf(stable):
    draws = sample_offspring_batch(stable, np.array([0.3, 0.6]))
    assert draws.tolist() == [0, 1]


def test_sample_offspring_single(stable):
    k = sample_offspring(stable, jax.random.PRNGKey(0))
    assert isinstance(k, int)
    assert k >= 0


def test_sample_offspring_frequencies(fam, mc_replicates):
    u = np.asarray(jax.random.uniform(jax.random.PRNGKey(3), (mc_replicates,), dtype=jnp.float64))
    draws = sample_offspring_batch(fam, u)
    p = np.asarray(fam.coefficients(6))
    for k in range(6):
        p_hat = np.mean(draws == k)
        se = math.sqrt(p[k] * (1.0 - p[k]) / mc_replicates)
        assert abs(p_hat - p[k]) <= 4.0 * se


def test_sample_offspring_deep_tail(stable):
    # Table growth for v = 1e-9, bisection on the closed-form tail for v = 1e-12.
    for v in (1e-9, 1e-12):
        k = int(sample_offspring_batch(stable, np.array([1.0 - v]))[0])
        v_eff = 1.0 - (1.0 - v)
        assert float(stable.tail_probs_at(float(k))) < v_eff
        assert float(stable.tail_probs_at(float(k - 1))) >= v_eff


def test_sample_offspring_support_cap(stable):
    draws = sample_offspring_batch(stable, np.array([0.3, 1.0 - 1e-12]), support_cap=1000)
    assert draws.tolist() == [0, CAPPED]


def test_simulate_survival(stable, mc_replicates):
    cfg = SimConfig(family=stable, horizon=2, replicates=mc_replicates, seed=7)
    res = simulate(cfg)
    assert res.q_hat[0] == 1.0
    assert abs(res.q_hat[2] - 0.3232233) <= 4.0 * res.q_stderr[2]
    p = np.asarray(iterate_series(stable, 2, 16).coeffs)
    for j in range(4):
        assert abs(res.p_hat[2, j] - p[j]) <= 4.0 * math.sqrt(p[j] * (1 - p[j]) / mc_replicates)


def test_simulate_schedule_independent(fam):
    a = simulate(SimConfig(family=fam, horizon=5, replicates=5000, seed=11, workers=1, chunk=1000))
    b = simulate(SimConfig(family=fam, horizon=5, replicates=5000, seed=11, workers=4, chunk=4096))
    assert np.array_equal(a.survivors, b.survivors)
    assert np.array_equal(a.occupancy, b.occupancy)
    assert np.array_equal(a.final, b.final)


def test_simulate_single_replicate_reproducible(stable):
    cfg = SimConfig(family=stable, horizon=10, replicates=1, seed=42)
    assert np.array_equal(simulate(cfg).final, simulate(cfg).final)


def test_simulate_cap_policies(stable):
    kwargs = dict(family=stable, horizon=10, replicates=2000, seed=5, pop_cap=5)
    with pytest.warns(UserWarning):
        censor = simulate(SimConfig(policy="censor", **kwargs))
    with pytest.warns(UserWarning):
        exclude = simulate(SimConfig(policy="exclude", **kwargs))
    assert censor.capped == exclude.capped > 0
    assert np.all(censor.used == 2000)
    assert exclude.used[0] == 2000 - exclude.capped
    assert np.all(exclude.survivors <= censor.survivors)
    assert int(np.sum(censor.final == CAPPED)) == censor.capped


def test_simulate_config_errors(stable):
    with pytest.raises(DomainError):
        simulate(SimConfig(family=stable, replicates=0))
    with pytest.raises(DomainError):
        simulate(SimConfig(family=stable, replicates=10, policy="drop"))


def test_simulate_json(stable):
    cfg = SimConfig(family=stable, horizon=2, replicates=100, seed=1)
    out = simulate(cfg).to_json(cfg)
    assert set(out) >= {"config_echo", "q_hat", "q_stderr", "p_hat", "stderr", "capped", "cap_tail_mass"}
    assert out["config_echo"]["seed"] == 1
    assert out["cap_tail_mass"] > 0.0


def test_simulate_exclude_keeps_estimates_in_range(stable):
    cfg = SimConfig(family=stable, horizon=10, replicates=2000, seed=5, pop_cap=5)
    assert cfg.policy == "exclude"
    with pytest.warns(UserWarning):
        res = simulate(cfg)
    assert res.capped > 0
    assert np.all(res.used == 2000 - res.capped)
    assert res.q_hat[0] == 1.0
    assert np.all((res.q_hat >= 0.0) & (res.q_hat <= 1.0))
    # Every kept replicate is either extinct or alive in each generation.
    assert np.array_equal(res.occupancy[:, 0] + res.survivors, res.used)
    assert np.all(res.p_hat <= 1.0)
    # Extinct replicates stay at Z = 0, so survival never increases.
    assert np.all(np.diff(res.survivors) <= 0)


def test_sampler_cache_is_bounded():
    first = get_sampler(Families["stable"](nu=0.5, c=0.5))
    assert get_sampler(Families["stable"](nu=0.5, c=0.5)) is first
    for k in range(SAMPLER_SLOTS + 1):
        get_sampler(Families["stable"](nu=0.5, c=0.5 - 0.01 * (k + 1)))
    assert len(_SAMPLERS) == SAMPLER_SLOTS
    assert get_sampler(Families["stable"](nu=0.5, c=0.5)) is not first
