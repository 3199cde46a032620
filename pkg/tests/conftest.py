import numpy as np
import pytest

from reeblab.census import enumerate_classes
from reeblab.flow import SurgeredFlow
from reeblab.surface import build_genus2_surface
from reeblab.surgery import SurgeryParams


@pytest.fixture(scope="session")
def surface():
    return build_genus2_surface()


@pytest.fixture(scope="session")
def params():
    return SurgeryParams()


@pytest.fixture(scope="session")
def flow(surface, params):
    return SurgeredFlow(surface, params)


@pytest.fixture(scope="session")
def geodesic_flow(surface, params):
    return SurgeredFlow(surface, SurgeryParams(q=0, eta=params.eta, eps=params.eps, delta=params.delta))


@pytest.fixture(scope="session")
def census6(surface):
    return enumerate_classes(surface, 6.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def lab():
    """Default-configuration lab shared by every test that needs the full census or orbit search."""
    from reeblab.acceptance import Lab

    return Lab()


CHECK_LINES = pytest.StashKey[list]()


@pytest.fixture
def report_check(request):
    """Record an acceptance line for the end-of-run summary and print it."""

    def report(line: str) -> None:
        print(line)
        request.config.stash.setdefault(CHECK_LINES, []).append(line)

    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(CHECK_LINES, [])
    if lines:
        terminalreporter.section("acceptance")
        for line in sorted(lines, key=lambda s: int(s.split("]")[1].split()[0])):
            terminalreporter.write_line(line)
