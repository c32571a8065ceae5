"""The eleven acceptance criteria at their stated tolerances.

Each criterion prints one PASS/FAIL line (also repeated in the terminal
summary) and fails the test when the criterion fails.
"""

import pytest

from nlbranch.acceptance import CRITERIA, run_criterion

from conftest import ACCEPTANCE_LINES


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    res = run_criterion(number)
    line = res.line()
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert res.passed, res.detail
    assert res.within_budget, f"criterion {number} took {res.runtime_s:.1f}s"
