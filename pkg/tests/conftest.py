import pytest

from app.core.geometry import build_cutset, build_lattice
from app.core.random_cluster import build_bonds
from app.models.chain import BoundaryMode, ChainConfig


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run long Monte Carlo protocols")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long Monte Carlo protocol, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def square_3():
    return build_lattice(2, 3)


@pytest.fixture
def wired_5():
    return build_lattice(2, 5, ghost=True)


@pytest.fixture
def weak_origin_bonds(wired_5):
    """L=5 wired lattice with the four bonds around the origin weakened"""
    return build_bonds(wired_5, 1.0, 0.3, build_cutset(wired_5, 0))


@pytest.fixture
def short_chain():
    def make(mode=BoundaryMode.WEAKLY_WIRED_GHOST, sweeps=4000, burn_in=500, **kwargs):
        return ChainConfig(sweeps=sweeps, burn_in=burn_in, mode=mode, **kwargs)
    return make
