import math

import numpy as np
import pytest

from layerpack.exceptions import ValidationError
from layerpack.optimizer import (
    OptConfig,
    diagnose_sweep,
    geometric_profile,
    maximize_fixed_K,
    maximize_geometric,
    plateau_K,
    projected_gradient_norm,
    stationarity_report,
    sweep_K,
)
from layerpack.permuton import density_value

FAST = OptConfig(restarts=4)


def test_fixed_K_closed_forms():
    res = maximize_fixed_K((1, 2), 2)
    assert res.converged
    assert res.value == pytest.approx(4 / 9, abs=1e-12)
    assert res.lengths.lengths == pytest.approx((1 / 3, 2 / 3), abs=1e-9)
    res = maximize_fixed_K((2, 2), 2)
    assert res.value == pytest.approx(3 / 8, abs=1e-10)
    assert res.lengths.lengths == pytest.approx((0.5, 0.5), abs=1e-9)
    res = maximize_fixed_K((2,), 1)
    assert res.value == 1.0


def test_fixed_K_below_layer_count():
    res = maximize_fixed_K((1, 1, 1), 2)
    assert res.value == 0.0
    with pytest.raises(ValidationError):
        maximize_fixed_K((1, 2), 0)


def test_fixed_K_is_deterministic():
    a = maximize_fixed_K((2, 1, 2), 5, FAST)
    b = maximize_fixed_K((2, 1, 2), 5, FAST)
    assert a.to_record() == b.to_record()


def test_threads_do_not_change_result():
    a = maximize_fixed_K((1, 2), 4, FAST)
    b = maximize_fixed_K((1, 2), 4, OptConfig(restarts=4, threads=3))
    assert a.to_record() == b.to_record()


def test_optimum_is_stationary():
    res = maximize_fixed_K((2, 1, 2), 4)
    assert res.converged
    assert projected_gradient_norm((2, 1, 2), res.lengths.lengths) < 1e-9
    # symmetric pattern, symmetric optimum
    x = res.lengths.lengths
    assert x == pytest.approx(tuple(reversed(x)), abs=1e-8)


def test_optimum_beats_random_points():
    res = maximize_fixed_K((1, 2), 4, FAST)
    rng = np.random.default_rng(1)
    for _ in range(200):
        assert density_value((1, 2), rng.dirichlet(np.ones(4))) <= res.value + 1e-12


def test_sweep_examples():
    rows = sweep_K((1, 2), 1, 2)
    assert rows[0].value == 0.0
    assert rows[1].value == pytest.approx(4 / 9, abs=1e-12)
    rows = sweep_K((2, 2), 2, 6, FAST)
    assert all(r.increment <= 1e-9 for r in rows[1:])
    assert plateau_K(rows) == 2


def test_sweep_is_monotone():
    rows = sweep_K((5, 1, 2), 3, 7, FAST)
    vals = [r.value for r in rows]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    assert all(r.increment > 0 for r in rows[1:])


def test_diagnose_sweep_labels():
    rows = sweep_K((2, 2), 1, 8, FAST)
    assert diagnose_sweep(rows).startswith("plateau")
    rows = sweep_K((1, 2), 2, 8, FAST)
    assert diagnose_sweep(rows).startswith("unbounded")


def test_sweep_rejects_bad_range():
    with pytest.raises(ValidationError):
        sweep_K((1, 2), 3, 2)


def test_geometric_examples():
    r, v = maximize_geometric((1, 2), 40)
    assert abs(v - (2 * math.sqrt(3) - 3)) < 1e-3
    assert v <= 2 * math.sqrt(3) - 3 + 1e-12
    assert r == pytest.approx((math.sqrt(3) - 1) / 2, abs=1e-6)
    _, v = maximize_geometric((2,), 1)
    assert v == 1.0
    _, v = maximize_geometric((1, 2), 2)
    assert v == pytest.approx(4 / 9, abs=1e-9)


def test_geometric_profile():
    x = geometric_profile(3, 0.5, "increasing")
    assert x == pytest.approx([1 / 7, 2 / 7, 4 / 7])
    assert geometric_profile(3, 0.5, "decreasing") == pytest.approx([4 / 7, 2 / 7, 1 / 7])
    with pytest.raises(ValidationError):
        geometric_profile(3, 0.5, "sideways")


def test_stationarity_examples():
    res = maximize_fixed_K((13, 1, 2), 6)
    rep = stationarity_report((13, 1, 2), res)
    assert rep.x1_ge_x2 and rep.x1_ge_n_x2
    res = maximize_fixed_K((2, 1, 2), 4)
    rep = stationarity_report((2, 1, 2), res)
    assert rep.n == 2
    with pytest.raises(ValidationError):
        stationarity_report((2, 2), res)
