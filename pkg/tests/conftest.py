"""Shared fixtures and the acceptance-summary reporter.

Acceptance tests call :func:`record_criterion`; at the end of the run the
terminal summary prints one PASS/FAIL line per recorded criterion so the
overall result can be audited at a glance.
"""

from __future__ import annotations

import numpy as np
import pytest

_ACCEPTANCE: dict = {}


def record_criterion(num: int, description: str, passed: bool,
                     detail: str = "") -> None:
    """Register an acceptance-criterion outcome for the final summary."""
    prev = _ACCEPTANCE.get(num)
    if prev is not None:
        passed = passed and prev[1]
        if prev[2] and detail:
            detail = prev[2] + "; " + detail
        elif prev[2]:
            detail = prev[2]
    _ACCEPTANCE[num] = (description, passed, detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        desc, passed, detail = _ACCEPTANCE[num]
        verdict = "PASS" if passed else "FAIL"
        line = f"criterion {num} [{verdict}]: {desc}"
        if detail:
            line += f" ({detail})"
        tr.write_line(line, green=passed, red=not passed)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
