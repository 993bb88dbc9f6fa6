import os
from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings

from hegemon.model import line_world

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", parent=settings.get_profile("default"), max_examples=500)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_KEY = pytest.StashKey[list]()

GRID5 = ["0", "1/4", "1/2", "3/4", "1"]


def three_country_world():
    """Three small countries at 1/4, 1/2, 3/4 with g = 0.5, unit measures."""
    return line_world(["1/4", "1/2", "3/4"], GRID5, 0.5, 0.5)


@pytest.fixture
def three_country():
    return three_country_world()


Q = Fraction


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
