import sys

import pytest
from hypothesis import settings

from fibermeasure import construction, systems

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture(scope="session")
def tri():
    return systems.tri_overlap()


@pytest.fixture(scope="session")
def tri_plan(tri):
    return construction.build_family_conformal(tri)


@pytest.fixture(scope="session")
def dyadic_plan():
    return construction.build_family_conformal(systems.dyadic())


@pytest.fixture(scope="session")
def cantor_plan():
    return construction.build_family_conformal(systems.cantor())


@pytest.fixture(scope="session")
def plane_plan():
    return construction.build_family_affine(systems.four_map_plane())


@pytest.fixture(scope="session")
def moebius_plan():
    return construction.build_family_conformal(systems.moebius_pair())


# module-level plan for hypothesis tests (function-scoped fixtures do not mix with @given)
_TRI_PLAN = construction.build_family_conformal(systems.tri_overlap())


def pytest_terminal_summary(terminalreporter):
    acc = sys.modules.get("test_acceptance")
    if acc is None or not acc.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(acc.RESULTS):
        terminalreporter.write_line(acc.RESULTS[k])
