import pytest

from multiscale_bft.topology import build_expander_stack, build_hypercube


@pytest.fixture(scope="session")
def cube72():
    return build_hypercube(7, 2)


@pytest.fixture(scope="session")
def cube73():
    return build_hypercube(7, 3)


@pytest.fixture(scope="session")
def small_stack():
    # 64 nodes: layer sizes 16, 32, 64
    return build_expander_stack(64, 16, [0.5, 0.5], seed=4)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
