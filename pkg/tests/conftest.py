from datetime import datetime

import pytest

from trolldetect.config import demo_resources
from trolldetect.corpus import Comment


def make_comment(
    text: str = "",
    cid: str = "c1",
    user: str = "u1",
    pub: str = "p1",
    ts: str = "2014-03-12T10:30:00+02:00",
    rank: int = 1,
    size: int = 1,
    parent: str | None = None,
    pos_tags=None,
) -> Comment:
    return Comment(cid, user, pub, datetime.fromisoformat(ts), rank, size, text, parent, pos_tags)


@pytest.fixture(scope="session")
def resources():
    return demo_resources()


# acceptance reporting: one PASS/FAIL line per criterion in the terminal summary

_criteria: dict[str, list[bool]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion verified by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    name = mark.args[0]
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _criteria.setdefault(name, []).append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, results in _criteria.items():
        status = "PASS" if all(results) else "FAIL"
        terminalreporter.write_line(f"{status}  {name}")
