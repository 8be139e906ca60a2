import jax
import pytest

jax.config.update("jax_enable_x64", True)

from gwcrit import Families  # noqa: E402


FAMILY_PARAMS = {
    "stable": {"nu": 0.5, "c": 0.5},
    "perturbed": {"nu": 0.5, "c": 0.4, "d": 0.2},
}


def pytest_addoption(parser):
    parser.addoption("--all", action="store_true", help="run long horizons and 10^6 replicates")


def pytest_generate_tests(metafunc):
    if "family_name" in metafunc.fixturenames:
        metafunc.parametrize("family_name", ["stable", "perturbed"])

    if "mc_replicates" in metafunc.fixturenames:
        if metafunc.config.getoption("all"):
            metafunc.parametrize("mc_replicates", [10**6])
        else:
            metafunc.parametrize("mc_replicates", [10**5])

    if "long_horizon" in metafunc.fixturenames:
        if metafunc.config.getoption("all"):
            metafunc.parametrize("long_horizon", [10**6])
        else:
            metafunc.parametrize("long_horizon", [10**5])


@pytest.fixture
def fam(family_name):
    return Families[family_name](**FAMILY_PARAMS[family_name])


@pytest.fixture
def stable():
    return Families["stable"](**FAMILY_PARAMS["stable"])


@pytest.fixture
def perturbed():
    return Families["perturbed"](**FAMILY_PARAMS["perturbed"])
