import pytest

CRITERIA = {
    1: "h-convergence k=1 (rates 2 / superconvergent 3)",
    2: "h-convergence k=2 (rates 3 / superconvergent 4)",
    3: "k=0 superconvergent columns stay near 1",
    4: "p-study ratios on the level-2 L-domain mesh",
    5: "polynomial exactness k=0..3 on 48 elements",
    6: "batched kernels match naive per-element loops, all perm codes",
    7: "structural invariants",
    8: "BDM variant exact for linear data",
    9: "k=2 solve on 12288 elements under 10 minutes",
}

_outcomes = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n = marker.args[0]
    failed = report.failed or (report.when == "call" and report.skipped)
    if report.when == "call" or failed:
        _outcomes[n] = _outcomes.get(n, True) and not failed


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n, title in CRITERIA.items():
        if n in _outcomes:
            status = "PASS" if _outcomes[n] else "FAIL"
        else:
            status = "NOT RUN"
        terminalreporter.write_line(f"criterion {n}: {status}  {title}")
