import numpy as np
import pytest

CRITERIA = []


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def criterion_log():
    def log(name, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'} criterion {name}: {detail}"
        CRITERIA.append(line)
        print(line)
        return ok

    return log


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA:
            terminalreporter.write_line(line)
