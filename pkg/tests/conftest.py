from collections import OrderedDict

import pytest

_results: "OrderedDict[int, list[tuple[str, str]]]" = OrderedDict()
_titles: dict[int, str] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    crit = marker.kwargs["criterion"]
    _titles.setdefault(crit, marker.kwargs.get("title", ""))
    _results.setdefault(crit, []).append((item.name, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(_results):
        parts = _results[crit]
        ok = all(outcome == "passed" for _, outcome in parts)
        detail = ""
        if not ok:
            detail = "  [failing: " + ", ".join(name for name, o in parts if o != "passed") + "]"
        tr.write_line(f"criterion {crit}: {'PASS' if ok else 'FAIL'}  {_titles[crit]}{detail}")
