import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_raster(rng, neurons, steps, rate=0.2):
    return (rng.random((neurons, steps)) < rate).astype(np.float64)


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = {}


@pytest.fixture
def criterion(request):
    """Record pass/fail of an acceptance test under its criterion number."""
    def record(number, title, detail=""):
        request.node.acceptance = (number, title, detail)
    yield record
    info = getattr(request.node, "acceptance", None)
    if info is not None:
        number, title, detail = info
        report = getattr(request.node, "rep_call", None)
        ok = report is not None and report.passed
        ACCEPTANCE_LINES[number] = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}" + (
            f"  [{detail}]" if detail else "")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
