import os

import pytest

from mlzeros.mltable import cached_solver

# every SolutionSet produced through the shared solver, for the cross-run property checks
RUNS: list = []
_CACHE: dict = {}


def shared_solver():
    solve = cached_solver(_CACHE)

    def run(*args, **kw):
        sols = solve(*args, **kw)
        if not any(s is sols for s in RUNS):
            RUNS.append(sols)
        return sols

    return run


def register(sols):
    RUNS.append(sols)
    return sols


def all_runs() -> list:
    out = []
    for s in list(_CACHE.values()) + RUNS:
        if not any(s is t for t in out):
            out.append(s)
    return out


@pytest.fixture(scope="session")
def solve_cache():
    return _CACHE


@pytest.fixture(scope="session")
def solver():
    return shared_solver()


def pytest_configure(config):
    config.addinivalue_line("markers", "extended: heavy runs, enabled with MLZEROS_EXTENDED=1")
    config.addinivalue_line("markers", "slow: minutes-long desk-scale runs")


def pytest_collection_modifyitems(config, items):
    if os.environ.get("MLZEROS_EXTENDED") == "1":
        return
    skip = pytest.mark.skip(reason="extended run; set MLZEROS_EXTENDED=1")
    for item in items:
        if "extended" in item.keywords:
            item.add_marker(skip)
