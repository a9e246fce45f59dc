# Release acceptance suite: one test per shipped correctness criterion. Each
# test prints a single PASS/FAIL line with the measured evidence and fails if
# the criterion is not met at its stated tolerance.
import json

import pytest

from safepg.harness.acceptance import (
    check_epsilon_budgets,
    check_estimator_consistency,
    check_gradient_integrity,
    check_projection_correctness,
    check_reduction_identity,
    check_reproducibility,
    check_safety_comparison,
    check_spi_safety,
)


def _report(res):
    status = "PASS" if res["passed"] else "FAIL"
    print(f"\n{status}  criterion {res['id']}: {res['description']} "
          f"({res['seconds']} s)\n  observed: {json.dumps(res['observed'])}\n"
          f"  expected: {res['expected']}")
    assert res["passed"], (
        f"criterion {res['id']} failed: observed {res['observed']}, "
        f"expected {res['expected']}")


def test_criterion_1_safe_policy_iteration():
    res = check_spi_safety()
    _report(res)
    assert res["seconds"] < 60.0


def test_criterion_2_auxiliary_cost_budgets():
    _report(check_epsilon_budgets())


def test_criterion_3_gradient_integrity():
    res = check_gradient_integrity()
    _report(res)
    assert res["seconds"] < 30.0


def test_criterion_4_projection_correctness():
    _report(check_projection_correctness())


def test_criterion_5_estimator_consistency():
    _report(check_estimator_consistency())


def test_criterion_6_reduction_to_unconstrained():
    _report(check_reduction_identity())


@pytest.mark.slow
def test_criterion_7_safety_comparison(tmp_path):
    res = check_safety_comparison(tmp_path / "safety-comparison")
    _report(res)
    assert res["observed"]["max_run_seconds"] < 600.0


def test_criterion_8_reproducibility():
    _report(check_reproducibility())
