import numpy as np
import pytest

from marma.core import ModelSpec, ParamVector
from marma.simulation import ScenarioSpec, simulate


def pytest_addoption(parser):
    parser.addoption(
        "--show-tables",
        action="store_true",
        default=False,
        help="Print org tables generated in report tests.",
    )
    parser.addoption(
        "--run-slow",
        action="store_true",
        default=False,
        help="Run desk-scale Monte Carlo studies (minutes each).",
    )


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "show_tables: prints generated org tables when --show-tables is passed",
    )
    config.addinivalue_line(
        "markers",
        "slow: desk-scale Monte Carlo study, skipped unless --run-slow is passed",
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip = pytest.mark.skip(reason="needs --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def show_tables(request):
    return request.config.getoption("--show-tables")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def arma_scenario():
    """MARMA(1,1), cloglog, X_t = sin(pi t / 50)."""
    spec = ModelSpec(1, 1, 1, "cloglog")
    gamma = ParamVector(0.5, [-0.5], [0.2], [-0.4])
    return ScenarioSpec(spec, gamma, n=500, burn_in=100, covariates=[("sin", 100)], seed=11)


@pytest.fixture
def arma_data(arma_scenario):
    return simulate(arma_scenario)
