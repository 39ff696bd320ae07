from __future__ import annotations

import pytest

from routelearn import load_scenario


@pytest.fixture(scope="session")
def three_edge():
    return load_scenario("three-edge")


@pytest.fixture(scope="session")
def cond2():
    return load_scenario("three-edge-cond2")


@pytest.fixture(scope="session")
def accurate_prior():
    return load_scenario("three-edge-accurate-prior")
