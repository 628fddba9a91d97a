"""Shared fixtures plus the acceptance-criteria summary hook.

Each test in test_acceptance.py carries a one-line docstring naming its
criterion.  The hooks below stash that line on the test report and print
a single [PASS]/[FAIL] line per criterion at the end of the run, so the
acceptance status is readable without scrolling through the full log.
"""

import numpy as np
import pytest

from cmchist.counts import CountTree
from cmchist.simulate import make_fully_connected


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when != "call" or "test_acceptance" not in item.nodeid:
        return
    doc = item.function.__doc__ or ""
    first = doc.strip().splitlines()[0] if doc.strip() else item.name
    report.user_properties.append(("criterion", first))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = []
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            label = dict(getattr(report, "user_properties", [])).get("criterion")
            if label is not None:
                lines.append((report.nodeid, status, label))
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, status, label in sorted(lines):
        tag = "PASS" if status == "passed" else "FAIL"
        terminalreporter.write_line(f"[{tag}] {label}")


@pytest.fixture(scope="session")
def small_chain():
    """A fully connected 2x2 spec reused by several suites."""
    return make_fully_connected(0.5, 2, 2, seed=101)


@pytest.fixture(scope="session")
def small_tree(small_chain):
    traj = small_chain.simulate(400, seed=7)
    return CountTree(traj, 2)


@pytest.fixture
def rng():
    return np.random.default_rng(20260819)
