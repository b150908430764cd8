"""Acceptance criteria 1-11, each at its stated tolerance and runtime budget.

Every criterion prints one PASS/FAIL line; the same lines are repeated in the
terminal summary by ``conftest.py``.
"""
import pytest

from lipmax import verify

CRITERIA = [c for c in verify.CHECKS if c.id.isdigit()]
RESULTS = {}


@pytest.mark.parametrize("check", CRITERIA, ids=lambda c: f"criterion_{int(c.id):02d}")
def test_criterion(check):
    out = check.run()
    line = verify.format_line(check, out)
    RESULTS[int(check.id)] = line
    print(line)
    assert out.passed, line
