import numpy as np
import pytest

from adiabaticity.selfcheck import StaticModel, random_hermitian  # noqa: F401


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# criterion lines recorded by test_acceptance.py, echoed after the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
