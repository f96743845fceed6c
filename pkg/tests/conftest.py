from pathlib import Path

import pytest

from tdroute.engine import build_index
from tdroute.network import GeneratorConfig, generate, load

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def diamond():
    return load(DATA / "diamond.tdg")


@pytest.fixture(scope="session")
def small_graph():
    return generate(GeneratorConfig(node_count=400, td_fraction=0.15, seed=21))


@pytest.fixture(scope="session")
def small_index(small_graph):
    return build_index(small_graph)


@pytest.fixture(scope="session")
def flat_graph():
    return generate(GeneratorConfig(node_count=300, td_fraction=0.0, seed=4))


@pytest.fixture(scope="session")
def flat_index(flat_graph):
    return build_index(flat_graph)


def pytest_terminal_summary(terminalreporter):
    from .report import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(LINES):
            terminalreporter.write_line(LINES[k])
