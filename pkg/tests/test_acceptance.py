"""Acceptance criteria 1-11 at their stated tolerances.

Each test prints one PASS/FAIL line (criterion 11: PASS/WARN). Criteria 10 and 11
share one pair of GPE runs and take about ten minutes on one core.
"""
import pytest

from gpvortex import acceptance as A


def _show(capsys, r):
    with capsys.disabled():
        print("\n" + r.line())


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6, 7])
def test_criterion(n, capsys):
    r = A.CRITERIA[n]()
    _show(capsys, r)
    assert r.status == "pass", r.message


@pytest.mark.slow
@pytest.mark.parametrize("n", [8, 9])
def test_radiation_criterion(n, capsys):
    r = A.CRITERIA[n]()
    _show(capsys, r)
    assert r.status == "pass", r.message


@pytest.fixture(scope="module")
def gpe_results():
    return A.criterion_10_11()


@pytest.mark.slow
def test_criterion_10(gpe_results, capsys):
    r = gpe_results[0]
    _show(capsys, r)
    assert r.status == "pass", r.message


@pytest.mark.slow
def test_criterion_11(gpe_results, capsys):
    r = gpe_results[1]
    _show(capsys, r)
    if r.status == "warn":
        pytest.xfail(f"directional refinement not observed: {r.message}")
    assert r.status == "pass"


def test_criterion_1_detects_corrupted_profile(capsys):
    r = A.criterion_1(perturb=1e-4)
    _show(capsys, r)
    assert r.status == "fail" and "residual" in r.message


def test_report_schema():
    rep = A.report([A.Result(1, "x", "pass"), A.Result(11, "y", "warn")])
    assert rep["passed"] and rep["schema"] == A.SCHEMA_VERSION
    assert not A.report([A.Result(2, "z", "fail")])["passed"]
