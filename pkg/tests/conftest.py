import pytest

from nuitsim.scenario import NodeSpec, Scenario, baseline_nuit

CRITERIA: list[str] = []


@pytest.fixture
def baseline() -> Scenario:
    return baseline_nuit()


@pytest.fixture
def one_node() -> Scenario:
    return Scenario("solo", "only", (NodeSpec("only", 0),))


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA:
            terminalreporter.write_line(line)
