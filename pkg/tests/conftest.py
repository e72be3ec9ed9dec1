import numpy as np
import pytest

from dunklab import DunklSystem
from dunklab.measure import WeightedMeasure

# acceptance verdicts, filled by tests/test_acceptance.py
CRITERIA: dict[int, tuple[bool, str]] = {}


def rank1(k):
    return DunklSystem.create("A1_power", k=k, N=1)


@pytest.fixture(scope="session")
def measures():
    cache = {}

    def get(k, N=1):
        key = (float(k), N)
        if key not in cache:
            cache[key] = WeightedMeasure(DunklSystem.create("A1_power", k=k, N=N))
        return cache[key]

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        ok, detail = CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
