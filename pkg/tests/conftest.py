from __future__ import annotations

import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from curvlab.chart import builtin_metric, point  # noqa: E402
from curvlab.tensor import Geometry  # noqa: E402

from engine_tables import golden_pg, hayward_geometry  # noqa: E402

PSTAR = dict(t=0.0, r=2.0, theta=math.pi / 2, phi=0.0)


@pytest.fixture(scope="session")
def hayward():
    return hayward_geometry()


@pytest.fixture(scope="session")
def pstar(hayward):
    """Hayward at (m, b, r, theta) = (1, 1, 2, pi/2)."""
    return hayward.at([point(hayward.spec, **PSTAR)])


@pytest.fixture(scope="session")
def golden():
    return golden_pg()


@pytest.fixture(scope="session")
def catalog():
    names = ("minkowski_spherical", "schwarzschild", "reissner_nordstrom", "global_monopole", "hayward")
    return {name: Geometry(builtin_metric(name)) for name in names}


def pytest_terminal_summary(terminalreporter):
    acc = sys.modules.get("test_acceptance")
    if acc is None or not acc.LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(acc.LINES, key=lambda s: int(s.split()[2])):
        terminalreporter.write_line(line)
