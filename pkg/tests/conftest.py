import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("repo", deadline=None, derandomize=True, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        num, text = mark.args
        _CRITERIA[num] = ("PASS" if rep.passed else "FAIL", text)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        status, text = _CRITERIA[num]
        terminalreporter.write_line(f"criterion {num:2d}: {status}  {text}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
