import numpy as np
import pytest

from cerkit import HardCycle

_LINES = []


class Verdict:
    """Collects one pass/fail line per acceptance criterion."""

    def __call__(self, name: str, ok, detail: str = "") -> bool:
        ok = bool(ok)
        line = f"{'PASS' if ok else 'FAIL'} {name}" + (f": {detail}" if detail else "")
        _LINES.append(line)
        print(line)
        return ok


@pytest.fixture
def verdict():
    return Verdict()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def single():
    return HardCycle.single_cnot()


@pytest.fixture(scope="session")
def double():
    return HardCycle.cnot_layer(4, [(0, 1), (2, 3)], name="double")


@pytest.fixture(scope="session")
def transversal():
    return HardCycle.transversal()


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
