import numpy as np
import pytest

from qdnls.grid import GridFunction
from qdnls.scattering import reflection_coefficients


@pytest.fixture(scope="session")
def gaussian():
    return GridFunction.gaussian(0.3)


@pytest.fixture(scope="session")
def bump():
    return GridFunction.bump(0.3)


@pytest.fixture(scope="session")
def zero():
    return GridFunction.zero()


@pytest.fixture(scope="session")
def gaussian_table(gaussian):
    return reflection_coefficients(gaussian)


@pytest.fixture(scope="session")
def reflected_table(gaussian):
    return reflection_coefficients(gaussian.reflected())


@pytest.fixture(scope="session")
def small_k_grid():
    return np.concatenate([-np.geomspace(0.05, 8.0, 12)[::-1], [0.0], np.geomspace(0.05, 8.0, 12)])


@pytest.fixture
def record(request):
    """Store one PASS/FAIL line per acceptance criterion for the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, {})

    def _record(n: int, passed: bool, detail: str) -> bool:
        lines[n] = f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        return passed

    return _record


_ACCEPTANCE_KEY = pytest.StashKey[dict]()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    rep = yield
    mark = item.get_closest_marker("criterion")
    if mark is not None and rep.when == "call" and rep.failed:
        lines = item.config.stash.setdefault(_ACCEPTANCE_KEY, {})
        n = mark.args[0]
        if n not in lines:
            lines[n] = f"criterion {n:2d}: FAIL  {call.excinfo.typename}: {call.excinfo.value}"
    return rep
