"""Explicit constants and inequalities about layered pattern maximizers.

Quantities that span hundreds of orders of magnitude (n^(n-L) for n in the
hundreds) are evaluated with mpmath at ``PRECISION_DPS`` digits; binomials and
the multinomial A are exact integers or fractions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import mpmath
import numpy as np

from .counting import merge_shape_ok
from .exceptions import ValidationError
from .perm import LayeredShape, ShapeLike, as_shape
from .permuton import tuple_sum_float

PRECISION_DPS = 60


def _ctx():
    ctx = mpmath.MPContext()
    ctx.dps = PRECISION_DPS
    return ctx


CTX = _ctx()


def packing_density_132():
    """2*sqrt(3) - 3 at working precision."""
    return 2 * CTX.sqrt(3) - 3


def sigma_prime(sigma_shape: ShapeLike) -> LayeredShape:
    """Drop the first layer."""
    shape = as_shape(sigma_shape)
    if shape.layer_count < 2:
        raise ValidationError("need at least two layers to remove the first one")
    return LayeredShape(shape.layer_sizes[1:])


@dataclass(frozen=True)
class SigmaSums:
    s0: float
    s1: float
    s2: float
    degenerate: bool = False


def sigma_sums(tail: Sequence[int], lengths: Sequence[float], n: int) -> SigmaSums:
    """The three partial sums over layers 3..K used for patterns (n, 1, tail).

    s0 runs over a < b < i_1 < ... < i_k with weight x_a^n x_b prod x^l,
    s1 over b < i_1 < ... with weight x_b prod x^l, s2 over i_1 < ... alone.
    """
    tail = [int(t) for t in tail]
    x = np.asarray(lengths, dtype=float)
    k = len(tail)
    if len(x) < k + 2:
        return SigmaSums(0.0, 0.0, 0.0, degenerate=True)
    rest = x[2:]
    return SigmaSums(
        tuple_sum_float([n, 1] + tail, rest),
        tuple_sum_float([1] + tail, rest),
        tuple_sum_float(tail, rest),
    )


def multinomial_A(n: int, tail: Sequence[int]) -> Fraction:
    """(n+L)! / (n! prod l_j!) with L = 1 + sum(tail)."""
    L = 1 + sum(tail)
    num = math.factorial(n + L) // math.factorial(n)
    den = 1
    for l in tail:
        den *= math.factorial(l)
    return Fraction(num, den)


def reconstruct_density(n: int, tail: Sequence[int], lengths: Sequence[float]) -> float:
    """A (x1^n x2 s2 + x1^n s1 + x2^n s1 + s0) for the pattern (n, 1, tail)."""
    s = sigma_sums(tail, lengths, n)
    x1, x2 = float(lengths[0]), float(lengths[1])
    A = float(multinomial_A(n, tail))
    return A * (x1**n * x2 * s.s2 + x1**n * s.s1 + x2**n * s.s1 + s.s0)


@dataclass
class CounterexampleAnalysis:
    n: int
    tail: tuple[int, ...]
    L: int
    A: Fraction
    d_prime: object
    lower_bound: object
    x1_upper: object
    rhs_bound: object
    contradiction: bool

    def to_record(self) -> dict:
        return {
            "n": self.n,
            "tail": list(self.tail),
            "L": self.L,
            "A": {"num": str(self.A.numerator), "den": str(self.A.denominator)},
            "d_prime": _s(self.d_prime),
            "lower_bound": _s(self.lower_bound),
            "x1_upper": _s(self.x1_upper),
            "rhs_bound": _s(self.rhs_bound),
            "contradiction": self.contradiction,
        }


def _s(v) -> str:
    return CTX.nstr(CTX.mpf(v), 20) if not isinstance(v, str) else v


def _mpf(v):
    if isinstance(v, Fraction):
        return CTX.mpf(v.numerator) / v.denominator
    if isinstance(v, str):
        return CTX.mpf(v)
    return CTX.mpf(v)


def counterexample_analysis(n: int, tail: Sequence[int], d_prime) -> CounterexampleAnalysis:
    """Lower and upper bounds on the optimal density of (n, 1, tail).

    lower_bound: C(n+L, n) (n/(n+L))^n (L/(n+L))^L d'   (long first layer
                 followed by a scaled permuton of density d' for the tail);
    x1_upper:    (A / (C(n+L, n) n^(n-L) d'))^(1/L);
    rhs_bound:   A (3 x1^n + x1/n) at x1 = x1_upper.
    ``contradiction`` is lower_bound > rhs_bound, i.e. no optimal permuton
    with finitely many layers can exist for this n.
    """
    tail = tuple(int(t) for t in tail)
    if any(t < 1 for t in tail):
        raise ValidationError("tail layer sizes must be >= 1")
    L = 1 + sum(tail)
    if n < L:
        raise ValidationError(f"n={n} must be at least L={L}")
    d = _mpf(d_prime)
    if not d > 0:
        raise ValidationError("d_prime must be positive")
    if d > 1:
        raise ValidationError("d_prime must be at most 1")
    A = multinomial_A(n, tail)
    Am = _mpf(A)
    binom = CTX.mpf(math.comb(n + L, n))
    nm = CTX.mpf(n)
    lower = binom * (nm / (n + L)) ** n * (CTX.mpf(L) / (n + L)) ** L * d
    x1 = (Am / (binom * nm ** (n - L) * d)) ** (CTX.mpf(1) / L)
    rhs = Am * (3 * x1**n + x1 / n)
    return CounterexampleAnalysis(n, tail, L, A, d, lower, x1, rhs, bool(lower > rhs))


@dataclass
class ChainRow:
    n: int
    lower_bound: object
    lower_estimate: object
    upper_estimate: object
    rhs_bound: object
    scale: object
    holds: dict

    def to_record(self) -> dict:
        return {
            "n": self.n,
            "lower_bound": _s(self.lower_bound),
            "lower_estimate": _s(self.lower_estimate),
            "upper_estimate": _s(self.upper_estimate),
            "rhs_bound": _s(self.rhs_bound),
            "C(n+3,n)/n^3": _s(self.scale),
            "holds": self.holds,
        }


def n0_13_chain(n: int, d_prime=None) -> ChainRow:
    """The closing estimates for the pattern (n, 1, 2), valid for n >= 13.

    lower_estimate = C(n+3, n) e^-3 (39/(16 n))^3 d'
    upper_estimate = 3 C(n+3, n) (3/(13^7 d' n^3) + (1/n) (3/(13^4 d' n^6))^(1/3))
    and the displayed comparisons against 0.33 and 0.19 times C(n+3, n)/n^3.
    """
    if n < 13:
        raise ValidationError("the chain is stated for n >= 13")
    d = packing_density_132() if d_prime is None else _mpf(d_prime)
    an = counterexample_analysis(n, (2,), d)
    binom = CTX.mpf(math.comb(n + 3, n))
    nm = CTX.mpf(n)
    scale = binom / nm**3
    lower_est = binom * CTX.exp(-3) * (CTX.mpf(39) / (16 * nm)) ** 3 * d
    upper_est = 3 * binom * (
        3 / (CTX.mpf(13) ** 7 * d * nm**3)
        + (1 / nm) * CTX.cbrt(3 / (CTX.mpf(13) ** 4 * d * nm**6))
    )
    c033 = CTX.mpf("0.33") * scale
    c019 = CTX.mpf("0.19") * scale
    holds = {
        "lower_bound >= lower_estimate": bool(an.lower_bound >= lower_est),
        "lower_estimate > 0.33 C/n^3": bool(lower_est > c033),
        "lower_bound > 0.33 C/n^3": bool(an.lower_bound > c033),
        "rhs_bound <= upper_estimate": bool(an.rhs_bound <= upper_est),
        "upper_estimate < 0.19 C/n^3": bool(upper_est < c019),
        "lower_bound > rhs_bound": bool(an.lower_bound > an.rhs_bound),
    }
    return ChainRow(n, an.lower_bound, lower_est, upper_est, an.rhs_bound, scale, holds)


@dataclass
class N0Result:
    tail: tuple[int, ...]
    d_prime: object
    horizon: int
    n0: int | None
    persistent: bool
    stable_from: int | None
    flags: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        return {
            "tail": list(self.tail),
            "d_prime": _s(self.d_prime),
            "horizon": self.horizon,
            "n0": self.n0,
            "persistent": self.persistent,
            "stable_from": self.stable_from,
        }


def find_n0(tail: Sequence[int], d_prime, horizon: int = 500) -> N0Result:
    """Smallest n >= L whose analysis yields a contradiction, checked up to ``horizon``.

    ``persistent`` records whether the flag stays true for every n in
    [n0, horizon]; ``stable_from`` is the first n after the last failure.
    """
    tail = tuple(int(t) for t in tail)
    L = 1 + sum(tail)
    d = _mpf(d_prime)
    if not 0 < d <= 1:
        raise ValidationError("d_prime must lie in (0, 1]")
    flags = {}
    for n in range(L, horizon + 1):
        flags[n] = counterexample_analysis(n, tail, d).contradiction
    true_ns = [n for n, f in flags.items() if f]
    n0 = true_ns[0] if true_ns else None
    if n0 is None:
        return N0Result(tail, d, horizon, None, False, None, flags)
    false_ns = [n for n, f in flags.items() if not f]
    last_false = max(false_ns) if false_ns else None
    persistent = last_false is None or last_false < n0
    stable_from = n0 if last_false is None else (last_false + 1 if last_false < horizon else None)
    return N0Result(tail, d, horizon, n0, persistent, stable_from, flags)


@dataclass(frozen=True)
class MergeConstants:
    C: object
    A_merge: object
    B_merge: object
    c: object
    K_bound: int

    def to_record(self) -> dict:
        return {
            "C": _s(self.C),
            "A_merge": _s(self.A_merge),
            "B_merge": _s(self.B_merge),
            "c": _s(self.c),
            "K_bound": str(self.K_bound),
        }


def big_layer_C(sigma_shape: ShapeLike) -> Fraction:
    """1 / (2 m^3 k^(2m+1)): the big-layer fraction used for the layer-count bound."""
    shape = as_shape(sigma_shape)
    m, k = shape.order, shape.layer_count
    return Fraction(1, 2 * m**3 * k ** (2 * m + 1))


def _pow00(base: int, exp: int) -> int:
    return 1 if exp == 0 else base**exp


def merge_constants(sigma_shape: ShapeLike, C) -> MergeConstants:
    """Constants of the merge lemma and the resulting layer-count bound.

    A = 2 C^(m - l_1) / ((3 l_1)^l_1 prod l_i^l_i)
    B = max_i e^m / (l_i^l_i l_{i+1}^l_{i+1} (m - l_i - l_{i+1})^(m - l_i - l_{i+1}))
    c = min(A / (k B), C) / 2,  K_bound = (floor(2/c) + 1)(l_1 - 1)
    with 0^0 = 1; i ranges over adjacent pairs.
    """
    shape = as_shape(sigma_shape)
    why = merge_shape_ok(shape)
    if why is not None:
        raise ValidationError(f"merge lemma hypothesis fails: {why}")
    Cm = _mpf(C)
    if not 0 < Cm < 1:
        raise ValidationError("C must lie in (0, 1)")
    sizes = shape.layer_sizes
    m, k, l1 = shape.order, shape.layer_count, sizes[0]
    prod = 1
    for l in sizes:
        prod *= l**l
    A = 2 * Cm ** (m - l1) / (CTX.mpf((3 * l1) ** l1) * prod)
    B = max(
        CTX.e**m
        / (
            sizes[i] ** sizes[i]
            * sizes[i + 1] ** sizes[i + 1]
            * _pow00(m - sizes[i] - sizes[i + 1], m - sizes[i] - sizes[i + 1])
        )
        for i in range(k - 1)
    )
    c = min(A / (k * B), Cm) / 2
    K_bound = (int(CTX.floor(2 / c)) + 1) * (l1 - 1)
    return MergeConstants(Cm, A, B, c, K_bound)


@dataclass(frozen=True)
class StructureThresholds:
    segment_layer: float
    klayers: float
    pair_threshold: float
    epsilon: float

    def to_record(self) -> dict:
        return {
            "segment_layer": self.segment_layer,
            "klayers": self.klayers,
            "pair_threshold": self.pair_threshold,
            "epsilon": self.epsilon,
        }


def has_consecutive_singletons(sigma_shape: ShapeLike) -> bool:
    sizes = as_shape(sigma_shape).layer_sizes
    return any(a == 1 and b == 1 for a, b in zip(sizes, sizes[1:]))


def structure_thresholds(sigma_shape: ShapeLike, epsilon: float) -> StructureThresholds:
    """Layer-length thresholds forced at optimal layered permutons.

    segment_layer: 1/(m^2 k^m), fraction of any segment covered by one layer;
    klayers:       1/(m^3 k^(2m+1)), at least k layers are this long;
    pair_threshold:(eps/4)^m / k, every multi-layer segment has a layer this
                   long once 2k-3 layers have length >= eps.
    """
    shape = as_shape(sigma_shape)
    if not 0 < epsilon <= 1:
        raise ValidationError("epsilon must lie in (0, 1]")
    if has_consecutive_singletons(shape):
        raise ValidationError("pattern has consecutive singleton layers")
    if shape.order < 2:
        raise ValidationError("pattern must have order >= 2")
    m, k = shape.order, shape.layer_count
    return StructureThresholds(
        segment_layer=1.0 / (m**2 * k**m),
        klayers=1.0 / (m**3 * k ** (2 * m + 1)),
        pair_threshold=(epsilon / 4) ** m / k,
        epsilon=epsilon,
    )


def finite_layer_conditions(sigma_shape: ShapeLike) -> bool:
    """l_1, l_k >= 2 and l_i + l_{i+1} >= max(l_1, l_k) + 1 for adjacent layers."""
    sizes = as_shape(sigma_shape).layer_sizes
    if len(sizes) < 2 or sizes[0] < 2 or sizes[-1] < 2:
        return False
    top = max(sizes[0], sizes[-1]) + 1
    return all(a + b >= top for a, b in zip(sizes, sizes[1:]))


def default_epsilon(sigma_shape: ShapeLike, lengths: Sequence[float]) -> float | None:
    """Length of the (2k-3)-th longest layer, or None if there are too few layers."""
    k = as_shape(sigma_shape).layer_count
    idx = max(2 * k - 3, 1)
    xs = sorted(lengths, reverse=True)
    return xs[idx - 1] if len(xs) >= idx else None


@dataclass
class ThresholdCheck:
    name: str
    holds: bool
    detail: dict

    def to_record(self) -> dict:
        return {"name": self.name, "holds": self.holds, **self.detail}


def check_optimum_structure(sigma_shape: ShapeLike, lengths: Sequence[float]) -> list[ThresholdCheck]:
    """Compare a numerical optimum with the forced layer-length thresholds."""
    shape = as_shape(sigma_shape)
    xs = [float(v) for v in lengths]
    k = shape.layer_count
    eps = default_epsilon(shape, xs) or min(xs)
    th = structure_thresholds(shape, eps)
    out = []
    long_layers = sum(1 for v in xs if v >= th.klayers)
    out.append(
        ThresholdCheck(
            "k layers above klayers threshold",
            long_layers >= k,
            {"count": long_layers, "needed": k, "threshold": th.klayers},
        )
    )
    out.append(
        ThresholdCheck(
            "whole square contains a segment_layer-long layer",
            max(xs) >= th.segment_layer,
            {"longest": max(xs), "threshold": th.segment_layer},
        )
    )
    if finite_layer_conditions(shape):
        short_pairs = [
            i + 1 for i in range(len(xs) - 1) if xs[i] < th.pair_threshold and xs[i + 1] < th.pair_threshold
        ]
        out.append(
            ThresholdCheck(
                "no two adjacent layers below pair_threshold",
                not short_pairs,
                {"threshold": th.pair_threshold, "epsilon": eps, "offending": short_pairs},
            )
        )
    return out
