"""Acceptance criteria 1-10 at their stated tolerances and runtime budgets.

Each test prints one pass/fail line. The lines are repeated in a summary
section at the end of the pytest run.
"""

import json

import pytest

from branchwalk.acceptance import CRITERIA, run_criterion

from conftest import ACCEPTANCE_LINES

SLOW = {4, 5, 6, 7, 8, 9}


def _check(number):
    res = run_criterion(number)
    print(res.line)
    ACCEPTANCE_LINES.append(res.line)
    assert res.passed, f"{res.line}\n{json.dumps(res.details, indent=1, default=str)}"


@pytest.mark.parametrize(
    "number",
    [pytest.param(k, marks=pytest.mark.slow) if k in SLOW else k for k in sorted(CRITERIA)],
    ids=[f"criterion{k}" for k in sorted(CRITERIA)],
)
def test_criterion(number):
    _check(number)
