import sys

import pytest

from corpus import corpus, corpus_cases, pop_a, pop_b
from samplesum.population import Design


@pytest.fixture
def popA():
    return pop_a()


@pytest.fixture
def popB():
    return pop_b()


@pytest.fixture
def designA():
    return Design(2, 4)


@pytest.fixture
def designB():
    return Design(1, 2)


@pytest.fixture(scope="session")
def populations():
    return corpus()


@pytest.fixture(scope="session")
def cases():
    return corpus_cases()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
