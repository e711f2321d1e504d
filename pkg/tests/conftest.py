import pytest

from mrfq.model import figure1_model
from mrfq.sampler import exact_joint, sample_exact

ACCEPTANCE_LINES: list[str] = []

# 1-based Figure-1 edge list, shifted once here
FIGURE1_EDGES = {(a - 1, b - 1) for a, b in [(1, 2), (1, 3), (1, 5), (2, 4), (2, 5), (3, 4), (4, 5)]}


def zb(*nodes):
    """1-based node labels -> 0-based tuple."""
    return tuple(v - 1 for v in nodes)


@pytest.fixture(scope="session")
def fig1():
    return figure1_model()


@pytest.fixture(scope="session")
def fig1_table(fig1):
    return exact_joint(fig1)


@pytest.fixture(scope="session")
def fig1_samples(fig1_table):
    return sample_exact(fig1_table, 100_000, seed=11)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
