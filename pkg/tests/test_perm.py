import pytest
from hypothesis import given
from hypothesis import strategies as st

from layerpack.exceptions import ValidationError
from layerpack.perm import (
    LayeredPermuton,
    LayeredShape,
    NotLayered,
    Permutation,
    canonical_decomposition,
    compositions,
    induced_pattern,
    is_layered,
    parse_permutation,
    parse_shape,
    realize,
)

shapes = st.lists(st.integers(1, 5), min_size=1, max_size=6).map(tuple)


def test_parse_examples():
    assert parse_permutation("1").values == (1,)
    assert parse_permutation("2 1 4 3").values == (2, 1, 4, 3)
    assert parse_permutation("2,1,4,3").values == (2, 1, 4, 3)
    with pytest.raises(ValidationError, match="1 is repeated"):
        parse_permutation("1 1 2")


def test_parse_errors_name_column():
    with pytest.raises(ValidationError, match="column 3"):
        parse_permutation("1 x 2")
    with pytest.raises(ValidationError, match="missing"):
        parse_permutation("1 3")
    with pytest.raises(ValidationError, match="column 4"):
        parse_shape("13,0,2")
    with pytest.raises(ValidationError):
        parse_permutation("   ")


def test_canonical_decomposition_examples():
    assert canonical_decomposition([2, 1, 4, 3]) == LayeredShape((2, 2))
    assert canonical_decomposition([1, 3, 2]) == LayeredShape((1, 2))
    res = canonical_decomposition([2, 3, 1])
    assert isinstance(res, NotLayered)
    assert not res
    assert res.witness == (1, 2, 3)
    assert res.pattern == (2, 3, 1)
    res = canonical_decomposition([3, 1, 2])
    assert res.pattern == (3, 1, 2)


def test_realize_examples():
    assert realize((2, 2)).values == (2, 1, 4, 3)
    assert realize((13, 1, 2)).values == tuple(range(13, 0, -1)) + (14, 16, 15)
    assert realize((1, 1, 1)).values == (1, 2, 3)


def test_induced_pattern_examples():
    p = [2, 1, 4, 3]
    assert induced_pattern(p, (1, 3)).values == (1, 2)
    assert induced_pattern(p, (3, 4)).values == (2, 1)
    assert induced_pattern([5, 4, 3, 2, 1], (1, 3, 5)).values == (3, 2, 1)
    with pytest.raises(ValidationError):
        induced_pattern(p, (3, 1))
    with pytest.raises(ValidationError):
        induced_pattern(p, (0, 2))
    with pytest.raises(ValidationError):
        induced_pattern(p, (2, 5))


def test_permuton_validation():
    assert LayeredPermuton((0.25, 0.75)).layer_count == 2
    with pytest.raises(ValidationError):
        LayeredPermuton((0.5, 0.4))
    with pytest.raises(ValidationError):
        LayeredPermuton((1.0, 0.0))
    assert LayeredPermuton.from_weights([1, 3]).lengths == (0.25, 0.75)


def test_segments_geometry():
    segs = LayeredPermuton((0.25, 0.75)).segments()
    assert segs == [(0.0, 0.25, 0.25, 0.0), (0.25, 1.0, 1.0, 0.25)]


def test_compositions_count():
    for n in range(1, 9):
        comps = list(compositions(n))
        assert len(comps) == 2 ** (n - 1)
        assert comps == sorted(comps)


@given(shapes)
def test_realize_round_trip(shape):
    p = realize(shape)
    assert canonical_decomposition(p) == LayeredShape(shape)
    assert is_layered(p)


@given(st.permutations(list(range(1, 7))))
def test_layered_iff_avoids_231_312(values):
    from itertools import combinations

    bad = False
    for idx in combinations(range(6), 3):
        pat = induced_pattern(values, [i + 1 for i in idx]).values
        if pat in ((2, 3, 1), (3, 1, 2)):
            bad = True
            break
    res = canonical_decomposition(values)
    assert isinstance(res, LayeredShape) == (not bad)
    if not bad:
        assert realize(res) == Permutation(tuple(values))
    else:
        assert induced_pattern(values, res.witness).values == res.pattern
