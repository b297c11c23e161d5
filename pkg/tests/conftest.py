import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gnbeirp.codebook import CodebookConfig, generate_codebook  # noqa: E402
from gnbeirp.geometry import PanelConfig, build_layout  # noqa: E402
from gnbeirp.radiation import AngularGrid, PatternStack  # noqa: E402

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def layout():
    return build_layout(PanelConfig())


@pytest.fixture(scope="session")
def codebook44():
    return generate_codebook(CodebookConfig())


@pytest.fixture(scope="session")
def grid1():
    return AngularGrid.uniform(resolution=1.0)


@pytest.fixture(scope="session")
def stack_peak(layout, codebook44, grid1):
    """(4,4) rank-2 stack, each pattern normalized to its own peak."""
    return PatternStack.build(layout, codebook44, grid1, reference="per-pattern-peak")


@pytest.fixture(scope="session")
def stack_global(layout, codebook44, grid1):
    return PatternStack.build(layout, codebook44, grid1, reference="global-max")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
