"""Collects acceptance outcomes and prints one PASS/FAIL line per criterion."""

import pytest

CRITERIA = {
    1: "aggregate matches double-summation oracle on 1000 record sets",
    2: "table3 single-app mu within 5% and sigma within 25% per tool",
    3: "table3 multi-app mu within 5% per tool",
    4: "csync instances equal apps, affine zero-noise memory, ~8 GiB at 90 apps",
    5: "fig5 csync multi-app t_recon V-shape",
    6: "nephio single/multi means and amortised overhead",
    7: "package lifecycle exhaustive check",
    8: "parallel 8 vs 1 byte-identical outputs",
    9: "cleanup restores fresh-cluster hash, pod capacity never exceeded",
    10: "iqr_filter and sample_sigma oracles, normal rejection rate",
    11: "iteration counts 200 and 180",
}

_outcomes: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (rep.when != "call" and rep.passed):
        return
    entry = _outcomes.setdefault(marker.args[0], {"passed": 0, "failed": [], "notes": []})
    if rep.passed:
        entry["passed"] += 1
    else:
        entry["failed"].append(item.name)
    entry["notes"].extend(n for n in getattr(item, "acceptance_notes", []) if n not in entry["notes"])


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n, title in CRITERIA.items():
        e = _outcomes.get(n)
        if e is None:
            tr.write_line(f"criterion {n:2d}: NOT RUN  {title}")
            continue
        status = "FAIL" if e["failed"] else "PASS"
        tr.write_line(f"criterion {n:2d}: {status}  {title}")
        for note in e["notes"]:
            tr.write_line(f"    {note}")


@pytest.fixture
def notes(request):
    """Lines attached to the criterion's summary entry."""
    request.node.acceptance_notes = []
    return request.node.acceptance_notes
