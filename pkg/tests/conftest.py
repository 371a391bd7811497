import pytest

from circledist import angles, circlemaps, denjoy

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def golden():
    return angles.IrrationalAngle.golden()


@pytest.fixture(scope="session")
def silver():
    return angles.IrrationalAngle.silver()


@pytest.fixture(scope="session")
def arnold_golden(golden):
    """Arnold map with eps = 0.5 tuned to the golden mean."""
    return circlemaps.tune_parameter(0.5, golden, K=18)


@pytest.fixture(scope="session")
def rot_golden(golden):
    return circlemaps.rotation(golden)


@pytest.fixture(scope="session")
def dmap(golden):
    return denjoy.build_denjoy(golden, 64)


@pytest.fixture(scope="session")
def dmap_f(dmap):
    return circlemaps.from_denjoy(dmap)


@pytest.fixture(scope="session")
def nu(dmap):
    return denjoy.orbit_weights(dmap)


@pytest.fixture(scope="session")
def conj_golden(golden):
    return circlemaps.conjugated_rotation(golden, [(1, 0.3, 0.1), (2, 0.15, 0.7), (3, 0.05, 1.3)])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
