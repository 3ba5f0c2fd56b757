"""Exact occurrence counting of patterns in permutations.

Everything here works with Python integers and :class:`fractions.Fraction`,
so counts never round.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .exceptions import ResourceGuardError, ValidationError
from .perm import (
    LayeredShape,
    Permutation,
    PermLike,
    ShapeLike,
    as_permutation,
    as_shape,
    compositions,
)

BRUTEFORCE_GUARD = 24
COMPOSITION_GUARD = 22
PRUNED_GUARD = 64
SYMMETRIC_GUARD = 9


def tuple_sum(weights: Sequence[Sequence]):
    """Sum over 1 <= i_1 < ... < i_k <= K of prod_j weights[i_j][j].

    ``weights`` is K rows of k entries each; entries may be ints, Fractions,
    floats or mpmath numbers.  Prefix DP, O(K k) multiplications.
    """
    if not weights:
        return 0
    k = len(weights[0])
    dp = [1] + [0] * k
    for row in weights:
        for j in range(k, 0, -1):
            w = row[j - 1]
            if w:
                dp[j] = dp[j] + dp[j - 1] * w
    return dp[k]


def count_bruteforce(sigma: PermLike, p: PermLike, guard: int = BRUTEFORCE_GUARD) -> int:
    """Number of index subsets of ``p`` inducing ``sigma`` (direct enumeration)."""
    sigma = as_permutation(sigma)
    p = as_permutation(p)
    m, n = sigma.order, p.order
    if m > n:
        return 0
    if n > guard:
        raise ResourceGuardError(
            f"brute force over C({n},{m}) subsets exceeds the guard |p| <= {guard}"
        )
    s = sigma.values
    pairs = [(a, b, s[a] < s[b]) for a, b in itertools.combinations(range(m), 2)]
    v = p.values
    count = 0
    for idx in itertools.combinations(range(n), m):
        for a, b, up in pairs:
            if (v[idx[a]] < v[idx[b]]) != up:
                break
        else:
            count += 1
    return count


def count_layered(sigma_shape: ShapeLike, pi_shape: ShapeLike) -> int:
    """Occurrences of a layered pattern in a layered permutation.

    Each pattern layer must land inside one host layer, distinct host
    layers in increasing order, so the count is
    sum over i_1 < ... < i_k of prod_j C(L_{i_j}, l_j).
    """
    sigma_shape = as_shape(sigma_shape)
    pi_shape = as_shape(pi_shape)
    rows = [[math.comb(L, l) for l in sigma_shape] for L in pi_shape]
    return tuple_sum(rows)


def density(sigma: PermLike, p: PermLike) -> Fraction:
    """Exact d(sigma, p); uses the layered DP when both are layered."""
    sigma = as_permutation(sigma)
    p = as_permutation(p)
    if sigma.order > p.order:
        raise ValidationError(
            f"pattern order {sigma.order} exceeds host order {p.order}"
        )
    count = count_fast(sigma, p)
    return Fraction(count, math.comb(p.order, sigma.order))


def count_fast(sigma: PermLike, p: PermLike) -> int:
    """Layered DP when possible, otherwise brute force."""
    from .perm import canonical_decomposition

    sigma = as_permutation(sigma)
    p = as_permutation(p)
    s_shape = canonical_decomposition(sigma)
    p_shape = canonical_decomposition(p)
    if isinstance(p_shape, LayeredShape):
        if not isinstance(s_shape, LayeredShape):
            return 0  # every pattern inside a layered host is layered
        return count_layered(s_shape, p_shape)
    return count_bruteforce(sigma, p)


@dataclass
class CompositionSearchResult:
    best_shape: LayeredShape
    best_count: int
    ties: list[LayeredShape]
    n: int
    pattern_order: int
    visited: int = 0

    @property
    def best_density(self) -> Fraction:
        return Fraction(self.best_count, math.comb(self.n, self.pattern_order))

    def to_record(self) -> dict:
        d = self.best_density
        return {
            "shape": list(self.best_shape),
            "count": str(self.best_count),
            "density": {"num": str(d.numerator), "den": str(d.denominator)},
            "ties": [list(t) for t in self.ties],
            "nodes_visited": self.visited,
        }


def _suffix_upper_bounds(sizes: Sequence[int], n: int) -> list[list[int]]:
    """bound[j][r] >= occurrences of layers sizes[j:] in any layered perm of order r.

    Decoupled recursion over the first host layer s:
    count_j(pi) = C(s, l_j) * count_{j+1}(rest) + count_j(rest); maximizing the
    two terms separately gives an upper bound.
    """
    k = len(sizes)
    bound = [[0] * (n + 1) for _ in range(k + 1)]
    bound[k] = [1] * (n + 1)
    for j in range(k - 1, -1, -1):
        lj = sizes[j]
        for r in range(1, n + 1):
            best = 0
            for s in range(1, r + 1):
                val = math.comb(s, lj) * bound[j + 1][r - s] + bound[j][r - s]
                if val > best:
                    best = val
            bound[j][r] = best
    return bound


def best_layered_of_order(
    sigma_shape: ShapeLike,
    n: int,
    pruned: bool = False,
    guard: int | None = None,
) -> CompositionSearchResult:
    """Maximize occurrences of a layered pattern over all compositions of ``n``.

    Compositions are visited depth-first in lexicographic order while the
    counting DP state is carried along, so each node costs O(k).  With
    ``pruned=True`` subtrees whose decoupled upper bound falls strictly below
    the incumbent are skipped (ties are never pruned).
    """
    sigma_shape = as_shape(sigma_shape)
    sizes = sigma_shape.layer_sizes
    k = len(sizes)
    m = sigma_shape.order
    if n < m:
        raise ValidationError(f"n={n} is smaller than the pattern order {m}")
    if guard is None:
        guard = PRUNED_GUARD if pruned else COMPOSITION_GUARD
    if n > guard:
        hint = "" if pruned else "; pass pruned=True (--pruned) to use branch-and-bound"
        raise ResourceGuardError(
            f"enumerating 2^{n - 1} compositions exceeds the guard n <= {guard}{hint}"
        )

    bound = _suffix_upper_bounds(sizes, n) if pruned else None
    best = -1
    ties: list[tuple[int, ...]] = []
    visited = 0
    path: list[int] = []

    def upper(dp, r):
        return sum(dp[j] * bound[j][r] for j in range(k + 1))

    def visit(dp, r):
        nonlocal best, ties, visited
        visited += 1
        if r == 0:
            c = dp[k]
            if c > best:
                best = c
                ties = [tuple(path)]
            elif c == best:
                ties.append(tuple(path))
            return
        if pruned and upper(dp, r) < best:
            return
        for s in range(1, r + 1):
            nxt = list(dp)
            for j in range(k, 0, -1):
                nxt[j] += nxt[j - 1] * math.comb(s, sizes[j - 1])
            path.append(s)
            visit(nxt, r - s)
            path.pop()

    visit([1] + [0] * k, n)
    ties.sort()
    return CompositionSearchResult(
        best_shape=LayeredShape(ties[0]),
        best_count=best,
        ties=[LayeredShape(t) for t in ties],
        n=n,
        pattern_order=m,
        visited=visited,
    )


def _all_permutations(n: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(1, n + 1))), dtype=np.int16)


def count_in_all_permutations(sigma: PermLike, n: int) -> np.ndarray:
    """Occurrence counts of ``sigma`` in every permutation of order ``n``.

    Rows follow ``itertools.permutations`` (lexicographic) order.
    """
    sigma = as_permutation(sigma)
    m = sigma.order
    perms = _all_permutations(n)
    counts = np.zeros(len(perms), dtype=np.int64)
    if m > n:
        return counts
    s = sigma.values
    pairs = [(a, b, s[a] < s[b]) for a, b in itertools.combinations(range(m), 2)]
    for idx in itertools.combinations(range(n), m):
        ok = np.ones(len(perms), dtype=bool)
        for a, b, up in pairs:
            cmp = perms[:, idx[a]] < perms[:, idx[b]]
            ok &= cmp if up else ~cmp
        counts += ok
    return counts


def sigma_optimal_bruteforce(
    sigma: PermLike, n: int, guard: int = SYMMETRIC_GUARD
) -> tuple[int, list[Permutation]]:
    """Maximum count of ``sigma`` over all n! permutations, with all maximizers."""
    sigma = as_permutation(sigma)
    if n > guard:
        raise ResourceGuardError(f"enumerating {n}! permutations exceeds the guard n <= {guard}")
    if n < sigma.order:
        raise ValidationError(f"n={n} is smaller than the pattern order {sigma.order}")
    counts = count_in_all_permutations(sigma, n)
    best = int(counts.max())
    perms = _all_permutations(n)
    witnesses = [Permutation(tuple(int(v) for v in perms[i])) for i in np.flatnonzero(counts == best)]
    return best, witnesses


def merge_layers(pi_shape: ShapeLike, index: int) -> LayeredShape:
    """Merge layers ``index`` and ``index + 1`` (1-based)."""
    pi_shape = as_shape(pi_shape)
    sizes = pi_shape.layer_sizes
    if not 1 <= index < len(sizes):
        raise ValidationError(f"merge index {index} outside 1..{len(sizes) - 1}")
    a = index - 1
    return LayeredShape(sizes[:a] + (sizes[a] + sizes[a + 1],) + sizes[a + 2 :])


def merge_shape_ok(sigma_shape: ShapeLike) -> str | None:
    """Why ``sigma_shape`` fails the merge-lemma shape conditions, or None."""
    sizes = as_shape(sigma_shape).layer_sizes
    k = len(sizes)
    if k < 2:
        return "pattern needs at least two layers"
    l1 = sizes[0]
    if sizes[-1] != l1:
        return f"first and last layers differ ({l1} != {sizes[-1]})"
    if l1 < 2:
        return "first layer must have size >= 2"
    for i in range(k - 1):
        if l1 not in (sizes[i], sizes[i + 1]):
            return f"layers {i + 1},{i + 2} of sizes ({sizes[i]},{sizes[i + 1]}) contain no layer of size {l1}"
    return None


def merge_hypotheses_hold(
    sigma_shape: ShapeLike, pi_shape: ShapeLike, index: int, C: float, c: float
) -> bool:
    """Whether merging layers ``index, index+1`` is covered by the merge lemma."""
    sigma_shape = as_shape(sigma_shape)
    pi_shape = as_shape(pi_shape)
    if merge_shape_ok(sigma_shape) is not None:
        return False
    N = pi_shape.order
    k = sigma_shape.layer_count
    if N * C < sigma_shape.order:
        return False
    if sum(1 for L in pi_shape if L >= C * N) < k:
        return False
    a, b = pi_shape[index - 1], pi_shape[index]
    return a <= c * N and b <= c * N


def merge_local_search(
    sigma_shape: ShapeLike,
    pi_shape: ShapeLike,
    c_threshold: float,
    C: float | None = None,
    c_lemma: float | None = None,
) -> LayeredShape:
    """Merge adjacent layers both of size <= c_threshold*|pi| until none remain.

    The leftmost qualifying pair is merged first.  When ``C`` and ``c_lemma``
    are given and a step satisfies the merge lemma's hypotheses, the count is
    asserted not to decrease (strictly increase once the merged layer reaches
    the first pattern layer's size).
    """
    sigma_shape = as_shape(sigma_shape)
    pi_shape = as_shape(pi_shape)
    if not 0 < c_threshold < 1:
        raise ValidationError("c_threshold must lie in (0, 1)")
    limit = c_threshold * pi_shape.order
    current = pi_shape
    count = count_layered(sigma_shape, current)
    while True:
        sizes = current.layer_sizes
        for i in range(len(sizes) - 1):
            if sizes[i] <= limit and sizes[i + 1] <= limit:
                break
        else:
            return current
        merged = merge_layers(current, i + 1)
        new_count = count_layered(sigma_shape, merged)
        if (
            C is not None
            and c_lemma is not None
            and merge_hypotheses_hold(sigma_shape, current, i + 1, C, c_lemma)
        ):
            if new_count < count:
                raise AssertionError(
                    f"merge of layers {i + 1},{i + 2} in {current} decreased the count"
                )
            if sizes[i] + sizes[i + 1] >= sigma_shape[0] and new_count <= count:
                raise AssertionError(
                    f"merge of layers {i + 1},{i + 2} in {current} did not increase the count"
                )
        current, count = merged, new_count


__all__ = [
    "CompositionSearchResult",
    "best_layered_of_order",
    "compositions",
    "count_bruteforce",
    "count_fast",
    "count_in_all_permutations",
    "count_layered",
    "density",
    "merge_hypotheses_hold",
    "merge_layers",
    "merge_local_search",
    "merge_shape_ok",
    "sigma_optimal_bruteforce",
    "tuple_sum",
]
