"""Per-criterion PASS/FAIL summary for tests marked ``criterion(n)``."""
from collections import defaultdict

import pytest

_results = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    # setup failures count too; the call phase carries the verdict otherwise
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        details = [v for k, v in item.user_properties if k == "detail"]
        _results[mark.args[0]].append((item.name, rep.passed, details))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_results):
        entries = _results[n]
        ok = all(p for _, p, _ in entries)
        passed = sum(p for _, p, _ in entries)
        tr.write_line(f"CRITERION {n}: {'PASS' if ok else 'FAIL'} ({passed}/{len(entries)} checks)")
        for name, p, details in entries:
            for d in details:
                tr.write_line(f"    {'ok  ' if p else 'FAIL'} {name}: {d}")
