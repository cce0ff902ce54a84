import re

import pytest

DEFAULT_SEED = 20240

_CRITERIA: dict[int, tuple[str, bool]] = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_criterion_(\d+)_(\w+)", report.nodeid)
    if not m:
        return
    n = int(m.group(1))
    ok = report.passed if report.when == "call" else not report.failed
    prev = _CRITERIA.get(n, (m.group(2), True))
    _CRITERIA[n] = (m.group(2), prev[1] and ok)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        name, ok = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n} {name}: {'PASS' if ok else 'FAIL'}")


def pytest_addoption(parser):
    parser.addoption("--seed", type=int, default=DEFAULT_SEED, help="seed for the randomized acceptance criteria")


@pytest.fixture
def seed(request):
    return request.config.getoption("--seed")
