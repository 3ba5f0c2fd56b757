from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from layerpack.counting import count_bruteforce
from layerpack.exceptions import ValidationError
from layerpack.perm import LayeredPermuton, LayeredShape, canonical_decomposition, compositions, realize
from layerpack.permuton import (
    condprob_bound_check,
    density_value,
    embed_permutation,
    estimate_density,
    multinomial,
    parse_permuton,
    permuton_density,
    permuton_density_exact,
    permuton_density_gradient,
    permuton_density_hessian,
    sample_permutation,
    sample_permutations,
    segments_csv,
)

small_shapes = st.lists(st.integers(1, 3), min_size=1, max_size=4).map(tuple)


def _simplex(K, seed):
    return np.random.default_rng(seed).dirichlet(np.ones(K))


def test_density_examples():
    d = permuton_density((1, 2), (1 / 3, 2 / 3))
    assert d.value == pytest.approx(4 / 9, abs=1e-15)
    assert d.multinomial_coefficient == 3
    assert permuton_density((2,), (1.0,)).value == 1.0
    assert permuton_density((1, 1), (1.0,)).value == 0.0
    assert permuton_density_exact((1, 2), [Fraction(1, 3), Fraction(2, 3)]) == Fraction(4, 9)


def test_multinomial():
    assert multinomial((13, 1, 2)) == 1680
    assert multinomial((2, 2)) == 6


def test_gradient_examples():
    g = permuton_density_gradient((1, 2), (1 / 3, 2 / 3))
    assert g == pytest.approx([4 / 3, 4 / 3], abs=1e-14)
    assert permuton_density_gradient((2,), (1.0,)) == pytest.approx([2.0])
    assert not np.any(permuton_density_gradient((1, 1, 1), (0.5, 0.5)))


@settings(max_examples=60, deadline=None)
@given(small_shapes, st.integers(1, 12), st.integers(0, 10**6))
def test_gradient_finite_differences(shape, K, seed):
    x = _simplex(K, seed)
    g = permuton_density_gradient(shape, x)
    h = 1e-6
    for t in range(K):
        e = np.zeros(K)
        e[t] = h
        fd = (density_value(shape, x + e) - density_value(shape, x - e)) / (2 * h)
        assert abs(g[t] - fd) <= max(1e-9, 1e-6 * abs(fd))


@settings(max_examples=30, deadline=None)
@given(small_shapes, st.integers(1, 8), st.integers(0, 10**6))
def test_hessian_finite_differences(shape, K, seed):
    x = _simplex(K, seed)
    H = permuton_density_hessian(shape, x)
    h = 1e-6
    for t in range(K):
        e = np.zeros(K)
        e[t] = h
        fd = (permuton_density_gradient(shape, x + e) - permuton_density_gradient(shape, x - e)) / (2 * h)
        assert np.all(np.abs(H[t] - fd) <= np.maximum(1e-7, 1e-5 * np.abs(fd)))


@settings(max_examples=60, deadline=None)
@given(small_shapes, st.integers(1, 10), st.integers(0, 10**6), st.floats(0.1, 3.0))
def test_homogeneous_and_bounded(shape, K, seed, t):
    x = _simplex(K, seed)
    d = density_value(shape, x)
    assert 0.0 <= d <= 1.0 + 1e-12
    assert density_value(shape, t * x) == pytest.approx(t ** sum(shape) * d, rel=1e-10, abs=1e-300)


def test_density_matches_exact_rationals():
    x = [Fraction(1, 7), Fraction(2, 7), Fraction(4, 7)]
    for shape in [(1, 2), (2, 1), (1, 1, 1), (2, 2)]:
        exact = permuton_density_exact(shape, x)
        assert density_value(shape, [float(v) for v in x]) == pytest.approx(float(exact), rel=1e-13)


def test_sampler_single_layer():
    for m in (1, 3, 7):
        assert sample_permutation((1.0,), m, seed=m).values == tuple(range(m, 0, -1))


def test_sampler_two_halves_frequency():
    rows = sample_permutations((0.5, 0.5), 2, 40000, seed=3)
    frac = np.mean(rows[:, 0] == 2)
    assert abs(frac - 0.5) < 4 * np.sqrt(0.25 / 40000)


def test_sampler_is_seeded():
    a = sample_permutations((0.2, 0.3, 0.5), 6, 50, seed=11)
    b = sample_permutations((0.2, 0.3, 0.5), 6, 50, seed=11)
    assert np.array_equal(a, b)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 6), st.integers(1, 9), st.integers(0, 10**6))
def test_samples_are_layered(K, m, seed):
    x = _simplex(K, seed)
    for row in sample_permutations(x, m, 200, seed=seed):
        assert isinstance(canonical_decomposition(row.tolist()), LayeredShape)


def test_estimate_examples():
    s = estimate_density([2, 1], (1.0,), 1000, seed=0)
    assert s.estimate == 1.0
    s = estimate_density([2, 3, 1], (0.3, 0.7), 20000, seed=0)
    assert s.estimate == 0.0
    with pytest.raises(ValidationError):
        estimate_density([1, 2], (1.0,), 0)


def test_estimate_132():
    s = estimate_density([1, 3, 2], (1 / 3, 2 / 3), 10**6, seed=0)
    assert s.within(4 / 9, 4.0)


def test_embed_examples():
    assert embed_permutation(realize((2, 2))).lengths == (0.5, 0.5)
    assert embed_permutation(realize((13, 1, 2))).lengths == (13 / 16, 1 / 16, 2 / 16)
    assert embed_permutation(realize((4,))).lengths == (1.0,)
    with pytest.raises(ValidationError, match="not layered"):
        embed_permutation([2, 3, 1])


def test_condprob_examples():
    r = condprob_bound_check((2,), realize((2,)))
    assert r.lhs == 0 and r.rhs == 2 and r.holds
    r = condprob_bound_check((1, 2), realize((2, 3)))
    assert r.lhs == abs(3 * Fraction(2, 5) * Fraction(3, 5) ** 2 - Fraction(6, 10))
    assert r.rhs == Fraction(9, 5)
    assert r.holds


def test_condprob_order_50():
    rng = np.random.default_rng(5)
    for _ in range(200):
        cuts = np.flatnonzero(rng.random(49) < rng.uniform(0.05, 0.95)) + 1
        host = tuple(int(v) for v in np.diff(np.concatenate([[0], cuts, [50]])))
        assert condprob_bound_check((2, 2), realize(host)).holds


def test_condprob_lhs_matches_independent_count():
    host = (3, 1, 4)
    p = realize(host)
    finite = Fraction(count_bruteforce(realize((1, 2)), p), 56)
    analytic = permuton_density_exact((1, 2), [Fraction(v, 8) for v in host])
    assert condprob_bound_check((1, 2), p).lhs == abs(analytic - finite)


def test_parse_permuton():
    assert parse_permuton("0.25, 0.75").lengths == (0.25, 0.75)
    p = parse_permuton("0.3333333333,0.6666666667")
    assert abs(sum(p.lengths) - 1.0) < 1e-15
    with pytest.raises(ValidationError):
        parse_permuton("0.5,0.4")
    with pytest.raises(ValidationError):
        parse_permuton("0.5,-0.5,1")
    with pytest.raises(ValidationError):
        parse_permuton("a,b")


def test_segments_csv():
    text = segments_csv(LayeredPermuton((0.5, 0.5)))
    assert text.splitlines() == ["x_start,x_end,y_start,y_end", "0.0,0.5,0.5,0.0", "0.5,1.0,1.0,0.5"]


def test_all_small_hosts_condprob():
    for n in range(2, 8):
        for host in compositions(n):
            assert condprob_bound_check((1, 1), realize(host)).holds
