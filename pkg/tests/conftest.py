import re

import pytest

_LINES = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_LINES] = {}


@pytest.fixture
def criterion(request):
    """``criterion(n, ok, detail)`` records one acceptance line, then asserts ``ok``."""
    def record(number, ok, detail):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        request.config.stash[_LINES][number] = line
        print(line)
        assert ok, line
    return record


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    report = yield
    match = re.match(r"test_criterion_(\d+)", item.name)
    lines = item.config.stash[_LINES]
    if match and report.failed and int(match.group(1)) not in lines:
        lines[int(match.group(1))] = (f"criterion {int(match.group(1)):2d}: FAIL  "
                                      f"error during {report.when}")
    return report


def pytest_terminal_summary(terminalreporter):
    lines = terminalreporter.config.stash[_LINES]
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])
