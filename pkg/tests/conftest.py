from pathlib import Path

import pytest

DATA = Path(__file__).parent / "data"

# (criterion, passed, seconds) for tests marked ``acceptance``
ACCEPTANCE_LINES: list[tuple[str, bool, float]] = []


@pytest.fixture
def data_dir():
    return DATA


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker and (rep.when == "call" or (rep.when == "setup" and rep.failed)):
        ACCEPTANCE_LINES.append((marker.args[0], rep.passed, rep.duration))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, secs in ACCEPTANCE_LINES:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  ({secs:.2f}s)")
