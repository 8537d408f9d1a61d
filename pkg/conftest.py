import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from gsca import SimParams, simulate_coupled  # noqa: E402


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run the full-scale reproduction checks")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-scale reproduction check")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def small_truth():
    return simulate_coupled(SimParams(I=20, J1=15, J2=25, R=3, seed=1))


@pytest.fixture
def small_data(small_truth):
    return small_truth.data


@pytest.fixture
def out_dir(tmp_path):
    path = tmp_path / "out"
    path.mkdir()
    return path
