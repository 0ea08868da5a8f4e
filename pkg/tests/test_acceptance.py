"""Acceptance criteria at full size with the default seed.

Each criterion prints one PASS/FAIL line, both inline and in the terminal summary.
"""
from __future__ import annotations

import pytest

from conftest import ACCEPTANCE_LINES
from rdiag.acceptance import CRITERIA, DEFAULT_SEED, run_criterion


@pytest.mark.parametrize("cid", list(CRITERIA))
def test_criterion(cid, capsys):
    res = run_criterion(cid, DEFAULT_SEED, quick=False)
    line = f"{res.line()} ({res.seconds:.1f}s)"
    ACCEPTANCE_LINES.append(line)
    with capsys.disabled():
        print(f"\n{line}")
    assert res.passed, res.details
