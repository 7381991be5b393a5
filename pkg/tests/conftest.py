import numpy as np
import pytest

from conicdet.rational_map import RationalMap, critical_data
from conicdet.spectral import WeightField, solve


@pytest.fixture(scope="session")
def f01():
    return RationalMap.degree2(0, 1)


@pytest.fixture(scope="session")
def football():
    return RationalMap.football()


@pytest.fixture(scope="session")
def football_spec(football):
    return solve(WeightField(football), 24, J=40)


@pytest.fixture(scope="session")
def f01_spec(f01):
    return solve(WeightField(f01), 30, J=30)


@pytest.fixture(scope="session")
def f01_data(f01):
    return critical_data(f01)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one summary line per acceptance criterion."""
    def record(name: str, ok: bool, detail: str, elapsed: float) -> bool:
        line = f"{name} {'PASS' if ok else 'FAIL'} ({elapsed:.1f} s) {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
