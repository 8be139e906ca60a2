import numpy as np
import pytest
from gwcrit import ConfigError, Families
from gwcrit.utils import (
    family_from_config,
    geometric_grid,
    load_config,
    loglog_slope,
    merge_flags,
    nested_fit,
    ols,
    parse_family_spec,
)
from gwcrit.utils.config import parse_key_values


def test_parse_key_values():
    out = parse_key_values("# family\nfamily = perturbed\nnu=0.5  # tail\nreps=1000\nverbose=true\n")
    assert out == {"family": "perturbed", "nu": 0.5, "reps": 1000, "verbose": True}
    with pytest.raises(ConfigError):
        parse_key_values("nu 0.5")


def test_load_config_yaml(tmp_path):
    fname = tmp_path / "cfg.yml"
    fname.write_text("family: stable\nnu: 0.5\nc: 0.5\n", encoding="utf-8")
    cfg = load_config(str(fname))
    assert cfg.family == "stable"
    assert cfg.nu == 0.5
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.cfg"))


def test_merge_flags(tmp_path):
    fname = tmp_path / "cfg.cfg"
    fname.write_text("nu=0.5\nc=0.4\n", encoding="utf-8")
    merged = merge_flags(load_config(str(fname)), {"c": 0.5, "d": None})
    assert merged.c == 0.5
    assert merged.nu == 0.5
    assert "d" not in merged


def test_parse_family_spec():
    fam = parse_family_spec("family=perturbed nu=0.5 c=0.4 d=0.2")
    assert isinstance(fam, Families["perturbed"])
    assert fam.config() == {"family": "perturbed", "nu": 0.5, "c": 0.4, "d": 0.2}
    with pytest.raises(ConfigError):
        parse_family_spec("family=stable nu=0.5 c=0.5 d=0.2")
    with pytest.raises(ConfigError):
        parse_family_spec("family=gamma nu=0.5")
    with pytest.raises(ConfigError):
        parse_family_spec("family=stable nu=0.5")


def test_family_from_config_bad_value():
    with pytest.raises(ConfigError):
        family_from_config({"family": "stable", "nu": "half", "c": 0.5})


def test_geometric_grid():
    assert geometric_grid(1, 100).tolist() == [1, 2, 3, 6, 10, 18, 32, 56, 100]


def test_ols_exact():
    x = np.stack([np.ones(5), np.arange(5.0)], axis=1)
    coef, se = ols(x, 2.0 + 3.0 * np.arange(5.0))
    assert np.allclose(coef, [2.0, 3.0])
    assert np.all(se < 1e-10)


def test_nested_fit_exact():
    n = geometric_grid(10, 10**4)
    y = 1.0 + 3.0 * np.log(n) / n - 2.0 / n
    fit = nested_fit(n, y, ["1", "log/n", "1/n"], which=1)
    assert np.isclose(fit["estimate"], 3.0)
    assert np.isclose(fit["estimate_half"], 3.0)


def test_loglog_slope():
    n = np.array([10.0, 100.0, 1000.0])
    assert np.isclose(loglog_slope(n, n**-2), -2.0)
    assert loglog_slope(n, np.zeros(3)) == 0.0
