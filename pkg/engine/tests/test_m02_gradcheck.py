"""Finite-difference agreement of analytic loss gradients."""

from __future__ import annotations

import pytest

from engine.m02_losses import gradcheck_suite
from engine.m02_losses.gradcheck import CASES, TOLERANCE


def test_all_losses_pass_small_suite() -> None:
    report = gradcheck_suite(seed=0, n_cases=4)
    assert [e.loss for e in report.entries] == list(CASES)
    for entry in report.entries:
        assert entry.worst_rel_error < TOLERANCE, entry
    assert report.passed


def test_corrupted_gradients_are_caught() -> None:
    report = gradcheck_suite(seed=0, n_cases=2, perturb_analytic=True)
    assert not report.passed
    assert all(not e.passed for e in report.entries)


def test_report_is_deterministic() -> None:
    a = gradcheck_suite(seed=5, n_cases=2, losses=["dice", "msge_hv"])
    b = gradcheck_suite(seed=5, n_cases=2, losses=["dice", "msge_hv"])
    assert a.model_dump_json() == b.model_dump_json()


@pytest.mark.slow
def test_full_suite() -> None:
    assert gradcheck_suite(seed=0, n_cases=50).passed
