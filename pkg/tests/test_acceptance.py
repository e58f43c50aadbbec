"""One test per release criterion; the table is printed at the end of the session."""
import pytest

from gnsflow.acceptance import CRITERIA, run_acceptance

from conftest import ACCEPTANCE_LINES


@pytest.fixture(scope="module")
def results():
    res = {r.number: r for r in run_acceptance()}
    ACCEPTANCE_LINES.extend(r.line() + f"  ({r.seconds:.2f}s)" for r in res.values())
    for r in res.values():
        print(r.line())
    return res


@pytest.mark.parametrize("number", range(1, len(CRITERIA) + 1))
def test_criterion(results, number):
    r = results[number]
    assert r.passed, r.detail


def test_runtime_budgets(results):
    budget = {1: 1, 2: 1, 3: 10, 4: 5, 5: 60, 6: 30, 7: 30, 8: 120, 9: 1, 10: 5}
    slow = {k: round(r.seconds, 2) for k, r in results.items() if r.seconds > budget[k]}
    assert not slow
