import re

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20260823)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per acceptance criterion."""
    lines = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            m = re.search(r"test_acceptance\.py::test_criterion_(\d+)", rep.nodeid)
            if m:
                verdict = "PASS" if outcome == "passed" else "FAIL"
                lines[int(m.group(1))] = verdict
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for num in sorted(lines):
            terminalreporter.write_line(f"criterion {num:2d}: {lines[num]}")
