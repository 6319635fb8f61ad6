import sys
from pathlib import Path

import pytest
from hypothesis import settings

from pilotsim import profiles

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("repo", derandomize=True, deadline=None, max_examples=200)
settings.load_profile("repo")


@pytest.fixture(scope="session")
def charger1():
    return profiles.CHARGER_1


@pytest.fixture(scope="session")
def charger2():
    return profiles.CHARGER_2


@pytest.fixture(scope="session")
def public_charger():
    return profiles.PUBLIC_CHARGER


@pytest.fixture(scope="session")
def ev():
    return profiles.DEFAULT_EV


ACCEPTANCE_LINES: list = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line for the terminal summary."""

    def record(name, ok, detail):
        ok = bool(ok)
        ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
