"""One PASS/FAIL line per acceptance criterion at the end of the run."""

from collections import defaultdict

import pytest

_outcomes = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion a test belongs to")


@pytest.fixture
def detail(request):
    """Attach a measured-value note to the summary line of this test's criterion."""
    def note(text):
        request.node.user_properties.append(("detail", text))
    return note


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        if hasattr(report, "wasxfail"):
            state = "xfail" if report.skipped else "xpass"
        else:
            state = report.outcome
        notes = [v for k, v in item.user_properties if k == "detail"]
        _outcomes[marker.args[0]].append((item.name, state, notes))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(_outcomes):
        checks = _outcomes[crit]
        bad = [c for c in checks if c[1] not in ("passed", "xpass")]
        verdict = "PASS" if not bad else "FAIL"
        tr.write_line(f"criterion {crit}: {verdict} ({len(checks) - len(bad)}/{len(checks)} checks)")
        for name, state, notes in checks:
            if state != "passed" or notes:
                suffix = f" [{state}]" if state != "passed" else ""
                tr.write_line(f"    {name}{suffix}: {'; '.join(notes)}")
