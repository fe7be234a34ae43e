"""The twelve end-to-end acceptance criteria, one test each.

Each test prints a single PASS/FAIL line (also collected into the terminal
summary). Criteria listed in KNOWN_FAILING do not reach their thresholds
with the current method; they are run in full and marked xfail with the
failing checks as the reason, and strict xfail makes an unexpected pass
visible. See README "Known failing criteria".
"""
import pytest

from nearcol.acceptance import CRITERIA, run_criterion

from conftest import record_acceptance

KNOWN_FAILING = {
    7: {"norm mu-slope = 1 - 2 nu +- 0.15"},
    9: {"ordering -pi/2 < A < B < 0", "sinA/sinB = 2 within factor 1.5"},
}


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    r = run_criterion(number)
    line = r.line()
    print(line)
    record_acceptance(line)
    assert r.error is None, r.error
    failed = {k for k, v in r.checks.items() if not v}
    if number in KNOWN_FAILING:
        # only the documented checks may fail; everything else must hold
        assert failed <= KNOWN_FAILING[number], failed - KNOWN_FAILING[number]
        if failed:
            pytest.xfail("known unattained: " + ", ".join(sorted(failed)))
        pytest.fail("criterion now passes; update KNOWN_FAILING and the README")
    assert r.passed, line
