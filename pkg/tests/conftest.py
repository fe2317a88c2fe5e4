import itertools

import numpy as np
import pytest


def brute_states(m):
    """All 2**(m*m) spin configurations, row-major, via itertools."""
    return np.array(list(itertools.product((-1, 1), repeat=m * m)), dtype=np.int8)


def edge_count_stat(state, m):
    """2*m^2 minus twice the number of disagreeing toroidal edges."""
    lat = np.asarray(state).reshape(m, m)
    disagree = 0
    for i in range(m):
        for j in range(m):
            disagree += lat[i, j] != lat[i, (j + 1) % m]
            disagree += lat[i, j] != lat[(i + 1) % m, j]
    return 2 * m * m - 2 * disagree


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ----------------------------------------------------------------------------
# acceptance reporting: one PASS/FAIL line per criterion in the terminal summary

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.fixture
def record(request):
    """Attach a detail string to the running criterion's summary line."""
    marker = request.node.get_closest_marker("criterion")

    def _record(detail):
        entry = _CRITERIA.setdefault(marker.args[0], {"title": marker.args[1]})
        entry.setdefault("details", []).append(detail)

    return _record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    report = outcome.get_result()
    entry = _CRITERIA.setdefault(marker.args[0], {"title": marker.args[1]})
    # setup time counts too: shared fixtures are built on first use
    if report.when != "teardown":
        entry["seconds"] = entry.get("seconds", 0.0) + report.duration
    if report.when == "call" or report.failed:
        entry["passed"] = entry.get("passed", True) and report.passed


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        e = _CRITERIA[number]
        verdict = "PASS" if e.get("passed") else "FAIL"
        tr.write_line(f"criterion {number:2d} {verdict}  {e['title']}  ({e.get('seconds', 0):.0f} s)")
        for d in e.get("details", []):
            tr.write_line(f"      {d}")
