import numpy as np
import pytest

from pinblock import netmodel


@pytest.fixture
def fig2_pair():
    return netmodel.build_pair(netmodel.fixture_fig2())


@pytest.fixture
def fig5_pair():
    return netmodel.build_pair(netmodel.fixture_fig5())


def path_laplacian(n):
    a = np.zeros((n, n))
    for i in range(n - 1):
        a[i, i + 1] = a[i + 1, i] = 1.0
    return a - np.diag(a.sum(axis=1))


def pair_from_edges(n, edges, pins):
    return netmodel.build_pair(netmodel.network_from_edges(n, edges, pinned=pins))


# one verdict line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def report_line(line):
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
