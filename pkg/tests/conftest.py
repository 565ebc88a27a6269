import numpy as np
import pytest

from gmmcc.factory import GenConfig, generate_instance
from gmmcc.gmm import GaussianComponent, GmmInstance, Polyhedron

_CRITERIA: dict[int, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        _CRITERIA[number] = ("PASS" if rep.passed else "FAIL", title)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): numbered acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        status, title = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {title}")


def small_instance(n=3, K=2, theta=0.9, seed=0, b=None) -> GmmInstance:
    """Hand-built mixture with moderate z values near the origin."""
    rng = np.random.default_rng(seed)
    comps = []
    for k in range(K):
        A = rng.normal(size=(n, n))
        comps.append(GaussianComponent(1.0 / K, rng.normal(size=n), A @ A.T / n + 0.5 * np.eye(n)))
    region = Polyhedron.box(np.full(n, -5.0), np.full(n, 5.0))
    return GmmInstance(rng.uniform(-1, 1, n), 2.0 if b is None else b, theta, comps, region)


@pytest.fixture
def inst3():
    return small_instance()


@pytest.fixture(scope="session")
def generated():
    return generate_instance(GenConfig(n=6, K=3, theta=0.95, seed=11))
