"""Acceptance criteria; each test prints one PASS/FAIL line.

Tolerances live in :mod:`sepdmrg.acceptance`.  Criterion 9 runs the full
n=24 scan from ``configs/dimer_scan.cfg`` and takes several minutes.
"""
import pytest

from sepdmrg import acceptance


@pytest.mark.parametrize("criterion", acceptance.CRITERIA, ids=lambda c: c.__name__)
def test_criterion(criterion, capsys):
    result = criterion()
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.detail
