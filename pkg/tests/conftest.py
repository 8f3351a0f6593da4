from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings

from toric_kstab.geometry import HPolytope

settings.register_profile("default", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

F = Fraction


@pytest.fixture
def unit_interval():
    return HPolytope.box([0], [1])


@pytest.fixture
def interval2():
    return HPolytope.box([0], [2])


@pytest.fixture
def unit_square():
    return HPolytope.box([0, 0], [1, 1])


@pytest.fixture
def p2_triangle():
    return HPolytope.from_vertices([(-1, -1), (2, -1), (-1, 2)])


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.report_lines():
        terminalreporter.write_line(line)
