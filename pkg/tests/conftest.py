from __future__ import annotations

import numpy as np
import pytest

from lazyoqw.zoo import paper_line_walk


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run tests marked slow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="slow; pass --runslow to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope="session")
def line_walk():
    return paper_line_walk()


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)
