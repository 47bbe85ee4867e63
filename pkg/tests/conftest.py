import numpy as np
import pytest

from gridtrace.frame import HOURS, WideFrame


def make_frame(start, n_days, fn=None, seed=0, unit="MW", variable="demand"):
    """Synthetic frame: ``fn(day_index, hour)`` or a daily cycle plus noise."""
    rng = np.random.default_rng(seed)
    hours = np.arange(HOURS)
    if fn is None:
        vals = (1000 + 200 * np.sin(2 * np.pi * (hours - 6) / 24)[None, :]
                + rng.normal(0, 20, (n_days, HOURS)))
    else:
        vals = np.array([[fn(d, h) for h in hours] for d in range(n_days)], dtype=float)
    dates = np.datetime64(start, "D") + np.arange(n_days)
    return WideFrame("test", variable, unit, dates, vals)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def two_year_frame():
    return make_frame("2019-01-01", 731)


# --------------------------------------------------------------------------
# acceptance reporting: one line per criterion in the terminal summary

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _CRITERIA[number] = (title, report.outcome, report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, outcome, duration = _CRITERIA[number]
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d} {verdict}  {title} ({duration:.2f} s)")
