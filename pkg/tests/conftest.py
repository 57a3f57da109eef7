import pytest

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when not in ("setup", "call"):
        return
    key = mark.args[0]
    entry = _CRITERIA.setdefault(key, {"title": mark.args[1], "passed": 0, "failed": 0, "tests": []})
    if report.failed:
        entry["failed"] += 1
        entry["tests"].append(item.name)
    elif report.when == "call" and report.passed:
        entry["passed"] += 1


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for key in sorted(_CRITERIA, key=lambda k: (int(str(k).rstrip("abcd")), str(k))):
        e = _CRITERIA[key]
        status = "PASS" if e["failed"] == 0 and e["passed"] > 0 else "FAIL"
        line = f"criterion {key:<4} {status}  {e['title']}"
        if e["failed"]:
            line += f"  (failing: {', '.join(e['tests'])})"
        tr.write_line(line)
