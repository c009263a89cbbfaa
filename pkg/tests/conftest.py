"""Shared fixtures plus the per-criterion summary for the acceptance suite."""

import pytest

from mmas_tsp import build_distance_matrix, load_instance

CRITERIA = {
    1: "quality with 2-opt (eil51, kroA100, d198)",
    2: "variant equivalence, Friedman test on eil51",
    3: "tabu oracle equivalence (LC, CT, BT)",
    4: "selection distributions (RWM, chunked RWM, WRS)",
    5: "tabu memory footprint",
    6: "determinism across thread counts",
    7: "2-opt correctness",
    8: "relative speed ordering",
    9: "construction-phase dominance",
}

_outcomes = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")
    config.addinivalue_line("markers", "slow: long-running test")


def pytest_runtest_logreport(report):
    crit = getattr(report, "criterion", None)
    if crit is None:
        return
    if report.when == "call" or report.outcome != "passed":
        _outcomes.setdefault(crit, []).append(report.outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(CRITERIA):
        results = _outcomes.get(crit)
        if not results:
            status = "NOT RUN"
        elif all(r == "passed" for r in results):
            status = "PASS"
        elif any(r == "failed" for r in results):
            status = "FAIL"
        else:
            status = "SKIPPED"
        terminalreporter.write_line(f"criterion {crit}: {status:7s} {CRITERIA[crit]}")


@pytest.fixture(scope="session")
def dm_cache():
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = build_distance_matrix(load_instance(name))
        return cache[name]

    return get
