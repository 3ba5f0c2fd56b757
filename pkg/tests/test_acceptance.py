"""Acceptance suite: one test per criterion, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py`` to get the lines in the summary, or
``layerpack verify-paper`` for the same checks as a JSON report.
"""
import math
import time

from layerpack import verify

# runtime budgets in seconds
BUDGET = {
    "oracle": 60,
    "packing-132": 30,
    "counterexample": 5,
    "sweep-13-1-2": 600,
    "bounded-layers": 300,
    "claims": 300,
    "condprob": 120,
    "merge": 60,
    "remark": 120,
    "gradient": 30,
    "monte-carlo": 120,
}


def _run(log, key, fn):
    t0 = time.perf_counter()
    res = fn()
    elapsed = time.perf_counter() - t0
    in_budget = elapsed < BUDGET[key]
    status = "PASS" if res.holds and in_budget else "FAIL"
    line = f"criterion {res.number:2d} {status} ({key}): {res.title}; {res.measured}; {elapsed:.1f}s"
    log.append(line)
    print(line)
    assert res.holds, res.measured
    assert in_budget, f"{elapsed:.1f}s over the {BUDGET[key]}s budget"
    return res


def test_01_oracle_equivalence(acceptance_log):
    res = _run(acceptance_log, "oracle", verify.check_oracle)
    assert res.measured["cases"] > 3000


def test_02_packing_density_132(acceptance_log):
    res = _run(acceptance_log, "packing-132", verify.check_packing_132)
    assert res.measured["geometric_value"] >= 2 * math.sqrt(3) - 3 - 1e-3


def test_03_n0_chain(acceptance_log):
    res = _run(acceptance_log, "counterexample", verify.check_counterexample_chain)
    assert res.measured["n0"] == 13


def test_04_counterexample_sweep(acceptance_log):
    _run(acceptance_log, "sweep-13-1-2", verify.check_unbounded_sweep)


def test_05_bounded_layers(acceptance_log):
    res = _run(acceptance_log, "bounded-layers", verify.check_bounded_layers)
    assert abs(res.measured["K2_value_2,2"] - 0.375) <= 1e-10


def test_06_claims_at_optima(acceptance_log):
    res = _run(acceptance_log, "claims", verify.check_claims)
    assert res.measured["optima_checked"] == 15


def test_07_condprob_bound(acceptance_log):
    res = _run(acceptance_log, "condprob", lambda: verify.check_condprob(1000, 0))
    assert res.measured["random_passed"] == "1000/1000"


def test_08_merge_lemma(acceptance_log):
    res = _run(acceptance_log, "merge", lambda: verify.check_merge(100, 0))
    assert res.measured["instances"] == 100


def test_09_remark_nonlayered_optimum(acceptance_log):
    _run(acceptance_log, "remark", verify.check_remark)


def test_10_gradient(acceptance_log):
    _run(acceptance_log, "gradient", lambda: verify.check_gradient(100, 0))


def test_11_monte_carlo(acceptance_log):
    res = _run(acceptance_log, "monte-carlo", verify.check_monte_carlo)
    assert res.measured["non_layered_samples"] == 0
