import functools

import numpy as np
import pytest

from mixvem.mesh import FAMILIES, generate_family

ACCEPTANCE_LINES = []


@functools.lru_cache(maxsize=None)
def family_mesh(family, size, seed=0):
    return generate_family(family, size, seed)


@pytest.fixture(params=FAMILIES)
def small_mesh(request):
    return family_mesh(request.param, 25)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
