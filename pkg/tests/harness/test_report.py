"""Tests how verifier reports combine their checks."""

import math

from brwire.harness.base import FINITE_N_NOTE, VerificationReport, upper_check


def test_diagnostic_checks_do_not_decide_the_status() -> None:
    checks = [
        upper_check("headline", 0.01, 0.05),
        upper_check("diagnostic", 0.3, 0.05, gating=False),
    ]
    report = VerificationReport.from_checks("example", checks)
    assert report.status == "pass"
    assert report.discrepancy == 0.01
    assert report.threshold == 0.05
    assert report.notes == [FINITE_N_NOTE]


def test_failed_gating_checks_are_named_in_the_notes() -> None:
    checks = [
        upper_check("diagnostic", 0.0, 0.05, gating=False),
        upper_check("first", 0.1, 0.05),
        upper_check("second", 0.01, 0.05),
        upper_check("third", math.nan, 0.05),
    ]
    report = VerificationReport.from_checks("example", checks, notes=["extra"])
    assert report.status == "fail"
    assert not report.passed
    assert report.discrepancy == 0.1
    assert report.notes == [FINITE_N_NOTE, "extra", "Failed at this finite n: first, third"]
