import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def strong():
    from sip_accel import build_strongly_convex_instance
    return build_strongly_convex_instance(0)


@pytest.fixture(scope="session")
def convex():
    from sip_accel import build_convex_instance
    return build_convex_instance()


@pytest.fixture(scope="session")
def toy():
    from sip_accel import build_toy1
    return build_toy1()
