import pytest

from parahyp.kernel import KernelEvaluator
from parahyp.problem_b import TransmissionParams


@pytest.fixture(scope="session")
def ev11():
    return KernelEvaluator.build(TransmissionParams(1.0, 1.0))


@pytest.fixture(scope="session")
def ev10():
    return KernelEvaluator.build(TransmissionParams(1.0, 0.0))


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
