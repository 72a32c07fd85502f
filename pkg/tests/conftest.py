import os
import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from lmquench.lagrange_mesh import build_mesh  # noqa: E402
from lmquench.pipeline import PointCache, quench_point  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

DEFAULT_N, DEFAULT_H = 121, 0.15


@pytest.fixture(scope="session")
def default_mesh():
    return build_mesh(DEFAULT_N, DEFAULT_H)


@pytest.fixture(scope="session")
def small_mesh():
    # half-width 4.2: enough for the lowest few trap levels, cheap to diagonalize
    return build_mesh(25, 0.35)


@pytest.fixture(scope="session")
def point_cache(tmp_path_factory):
    """Overlap cache shared by the whole session.

    Set ``LMQUENCH_TEST_CACHE`` to a directory to keep it between runs.
    """
    directory = os.environ.get("LMQUENCH_TEST_CACHE")
    if not directory:
        directory = tmp_path_factory.mktemp("quench-cache")
    return PointCache(directory)


@pytest.fixture(scope="session")
def quench(point_cache):
    """``quench(g, kappa, mesh=None)`` -> QuenchResult on the default mesh, cached."""
    memo = {}

    def get(g, kappa, mesh=None):
        mesh = mesh or build_mesh(DEFAULT_N, DEFAULT_H)
        key = (mesh.key(), float(g), float(kappa))
        if key not in memo:
            memo[key] = quench_point(mesh, float(g), float(kappa), cache=point_cache)[0]
        return memo[key]

    return get


# --------------------------------------------------------------- acceptance report

_CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion():
    """``criterion(number, passed, detail)`` records and prints one verdict line."""

    def record(number: int, passed: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        _CRITERIA[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[number])
