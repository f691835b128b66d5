"""Acceptance criteria 1-8.

The whole suite runs once per session; each criterion then gets its own
test, and the one-line verdicts are echoed in the terminal summary.
"""

import io
import sys

import pytest

from multiscale_bft import acceptance
from multiscale_bft.kernels import PhaseKing

ACCEPTANCE_LINES: list[str] = []


class _Tee(io.TextIOBase):
    def write(self, text):
        sys.__stdout__.write(text)
        ACCEPTANCE_LINES.extend(line for line in text.splitlines() if line)
        return len(text)


@pytest.fixture(scope="session")
def report():
    return acceptance.verify_paper_claims(workers=2, stream=_Tee())


@pytest.mark.parametrize("number", range(1, 9))
def test_criterion(report, number):
    res = report.by_number(number)
    assert res.passed, res.line()


def test_exit_status(report):
    assert report.exit_status() == 0
    assert len(report.text().splitlines()) == 8


def test_broken_king_round_is_caught(monkeypatch):
    """Negative control: a phase king whose non-king members ignore the king."""
    honest = PhaseKing.update

    def skip_king(self, j, site, st, received):
        if j % 3 == 2:
            return
        honest(self, j, site, st, received)

    monkeypatch.setattr(PhaseKing, "update", skip_king)
    res, _ = acceptance.criterion_4()
    assert not res.passed
    assert acceptance.AcceptanceReport([res]).exit_status() != 0
