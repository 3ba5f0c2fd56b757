"""Densities of layered patterns in finite-layer layered permutons.

For a pattern with layer sizes (l_1, ..., l_k) of order m and a permuton with
layer lengths (x_1, ..., x_K),

    d = m! / prod(l_j!) * sum_{i_1 < ... < i_k} prod_j x_{i_j}^{l_j}.

All terms are non-negative, so the prefix DP below loses at most
O((K + k) eps) relative accuracy without compensated summation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

import numpy as np

from .counting import density as exact_density
from .counting import tuple_sum
from .exceptions import ValidationError
from .perm import (
    LayeredPermuton,
    LayeredShape,
    PermLike,
    Permutation,
    ShapeLike,
    as_permutation,
    as_shape,
    canonical_decomposition,
)

LengthsLike = Union[LayeredPermuton, Sequence[float], np.ndarray]


def multinomial(shape: ShapeLike) -> int:
    """m! / prod(l_j!)."""
    shape = as_shape(shape)
    out = math.factorial(shape.order)
    for l in shape:
        out //= math.factorial(l)
    return out


def _lengths(perm: LengthsLike) -> np.ndarray:
    if isinstance(perm, LayeredPermuton):
        return np.asarray(perm.lengths, dtype=float)
    return np.asarray(perm, dtype=float)


@dataclass(frozen=True)
class PermutonDensity:
    value: float
    multinomial_coefficient: int

    def __float__(self) -> float:
        return self.value


# -- polynomial machinery ---------------------------------------------------


def _weights(x: np.ndarray, exps: np.ndarray) -> np.ndarray:
    return x[:, None] ** exps[None, :]


def _prefix(W: np.ndarray) -> np.ndarray:
    """P[t, j]: sum over tuples of pattern layers 1..j inside host layers 1..t."""
    K, k = W.shape
    P = np.zeros((K + 1, k + 1))
    P[0, 0] = 1.0
    for t in range(K):
        P[t + 1] = P[t]
        P[t + 1, 1:] += P[t, :-1] * W[t]
    return P


def _suffix(W: np.ndarray) -> np.ndarray:
    """S[t, j]: sum over tuples of pattern layers j+1..k inside host layers t+1..K.

    Row K is the empty suffix; S[t, k] = 1.
    """
    K, k = W.shape
    S = np.zeros((K + 1, k + 1))
    S[K, k] = 1.0
    for t in range(K - 1, -1, -1):
        S[t] = S[t + 1]
        S[t, :-1] += W[t] * S[t + 1, 1:]
    return S


def tuple_sum_float(exps: Sequence[float], x: np.ndarray) -> float:
    """sum_{i_1<...<i_k} prod_j x_{i_j}^{exps_j} in floating point."""
    exps = np.asarray(exps, dtype=float)
    x = np.asarray(x, dtype=float)
    if len(x) < len(exps):
        return 0.0
    return float(_prefix(_weights(x, exps))[-1, -1])


def _gradient_raw(exps: np.ndarray, x: np.ndarray) -> np.ndarray:
    K, k = len(x), len(exps)
    W = _weights(x, exps)
    dW = exps[None, :] * x[:, None] ** np.maximum(exps - 1, 0)[None, :]
    P = _prefix(W)
    S = _suffix(W)
    # d/dx_t = sum_j P[t, j-1] dW[t, j] S[t+1, j]
    return np.einsum("tj,tj,tj->t", P[:K, :k], dW, S[1:, 1:])


def permuton_density(sigma_shape: ShapeLike, perm: LengthsLike) -> PermutonDensity:
    shape = as_shape(sigma_shape)
    x = _lengths(perm)
    coef = multinomial(shape)
    if len(x) < shape.layer_count:
        return PermutonDensity(0.0, coef)
    val = coef * tuple_sum_float(shape.layer_sizes, x)
    return PermutonDensity(val, coef)


def density_value(sigma_shape: ShapeLike, x: LengthsLike) -> float:
    return permuton_density(sigma_shape, x).value


def permuton_density_gradient(sigma_shape: ShapeLike, perm: LengthsLike) -> np.ndarray:
    """Partial derivatives of the density with respect to each layer length.

    The density is treated as a polynomial on R^K (no simplex constraint).
    """
    shape = as_shape(sigma_shape)
    x = _lengths(perm)
    if len(x) < shape.layer_count:
        return np.zeros(len(x))
    exps = np.asarray(shape.layer_sizes, dtype=float)
    return multinomial(shape) * _gradient_raw(exps, x)


def permuton_density_hessian(sigma_shape: ShapeLike, perm: LengthsLike) -> np.ndarray:
    """Second derivatives of the density polynomial.

    d/dx_s of the tuple sum equals F(row s -> derivative weights) minus
    F(row s -> 0); row s of the Hessian is the gradient of that difference.
    """
    shape = as_shape(sigma_shape)
    x = _lengths(perm)
    K, k = len(x), shape.layer_count
    H = np.zeros((K, K))
    if K < k:
        return H
    e = np.asarray(shape.layer_sizes, dtype=float)
    W = _weights(x, e)
    dW = e[None, :] * x[:, None] ** np.maximum(e - 1, 0)[None, :]
    ddW = (e * (e - 1))[None, :] * x[:, None] ** np.maximum(e - 2, 0)[None, :]
    P = _prefix(W)
    S = _suffix(W)
    H[np.arange(K), np.arange(K)] = np.einsum("tj,tj,tj->t", P[:K, :k], ddW, S[1:, 1:])
    for s in range(K):
        Ws = W.copy()
        Ws[s] = dW[s]
        W0 = W.copy()
        W0[s] = 0.0
        row = np.einsum("tj,tj,tj->t", _prefix(Ws)[:K, :k], dW, _suffix(Ws)[1:, 1:])
        row -= np.einsum("tj,tj,tj->t", _prefix(W0)[:K, :k], dW, _suffix(W0)[1:, 1:])
        row[s] = H[s, s]
        H[s] = row
    return multinomial(shape) * 0.5 * (H + H.T)


def permuton_density_exact(sigma_shape: ShapeLike, lengths: Sequence[Fraction]) -> Fraction:
    """Exact density for rational layer lengths."""
    shape = as_shape(sigma_shape)
    rows = [[Fraction(x) ** l for l in shape] for x in lengths]
    return multinomial(shape) * Fraction(tuple_sum(rows))


# -- sampling ---------------------------------------------------------------


@dataclass(frozen=True)
class SampleStats:
    trials: int
    hits: int
    estimate: float
    std_error: float

    def within(self, target: float, n_se: float = 4.0) -> bool:
        return abs(self.estimate - target) <= n_se * self.std_error


def _sample_x(rng: np.random.Generator, size: int, m: int) -> np.ndarray:
    xs = rng.random((size, m))
    # Exact ties have probability zero; redraw the colliding point if one occurs.
    while True:
        xs.sort(axis=1)
        dup = np.zeros_like(xs, dtype=bool)
        dup[:, 1:] = xs[:, 1:] == xs[:, :-1]
        if not dup.any():
            return xs
        xs[dup] = rng.random(int(dup.sum()))


def _rank_layers(x: np.ndarray, xs: np.ndarray) -> np.ndarray:
    edges = np.cumsum(x)[:-1]
    layer = np.searchsorted(edges, xs, side="right")
    # y-order on the slope -1 support: layer ascending, then x descending
    order = np.lexsort((-xs, layer), axis=-1)
    values = np.empty_like(order)
    rows = np.arange(xs.shape[0])[:, None]
    values[rows, order] = np.arange(1, xs.shape[1] + 1)[None, :]
    return values


def sample_permutations(perm: LengthsLike, m: int, size: int, seed=None) -> np.ndarray:
    """``size`` independent Pi-random permutations of order ``m`` as rows."""
    if m < 1:
        raise ValidationError("m must be >= 1")
    rng = np.random.default_rng(seed)
    return _rank_layers(_lengths(perm), _sample_x(rng, size, m))


def sample_permutation(perm: LengthsLike, m: int, seed=None) -> Permutation:
    row = sample_permutations(perm, m, 1, seed)[0]
    return Permutation(tuple(int(v) for v in row))


def estimate_density(
    sigma: PermLike, perm: LengthsLike, trials: int, seed=None, chunk: int = 200_000
) -> SampleStats:
    """Monte Carlo estimate of d(sigma, perm) with a binomial standard error."""
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    sigma = as_permutation(sigma)
    target = np.asarray(sigma.values)
    x = _lengths(perm)
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    while done < trials:
        n = min(chunk, trials - done)
        sample = _rank_layers(x, _sample_x(rng, n, sigma.order))
        hits += int(np.all(sample == target[None, :], axis=1).sum())
        done += n
    p = hits / trials
    se = math.sqrt(p * (1.0 - p) / trials)
    return SampleStats(trials, hits, p, se)


# -- finite permutations ----------------------------------------------------


def embed_permutation(p: PermLike) -> LayeredPermuton:
    """Layered permuton with the layers of ``p`` at the same relative sizes."""
    p = as_permutation(p)
    shape = canonical_decomposition(p)
    if not isinstance(shape, LayeredShape):
        raise ValidationError(
            f"permutation is not layered (positions {shape.witness} induce "
            f"{''.join(map(str, shape.pattern))})"
        )
    n = p.order
    return LayeredPermuton(tuple(L / n for L in shape))


@dataclass(frozen=True)
class CondprobCheck:
    lhs: Fraction
    rhs: Fraction
    holds: bool


def condprob_bound_check(sigma_shape: ShapeLike, p: PermLike) -> CondprobCheck:
    """Exact |d(sigma, embed(p)) - d(sigma, p)| versus |sigma|^2 / |p|."""
    shape = as_shape(sigma_shape)
    p = as_permutation(p)
    host = canonical_decomposition(p)
    if not isinstance(host, LayeredShape):
        raise ValidationError("host permutation must be layered")
    if shape.order > p.order:
        raise ValidationError("pattern order exceeds host order")
    n = p.order
    analytic = permuton_density_exact(shape, [Fraction(L, n) for L in host])
    from .perm import realize

    finite = exact_density(realize(shape), p)
    lhs = abs(analytic - finite)
    rhs = Fraction(shape.order**2, n)
    return CondprobCheck(lhs, rhs, lhs <= rhs)


# -- text formats -----------------------------------------------------------


def parse_permuton(text: str) -> LayeredPermuton:
    """Comma-separated positive lengths; renormalized if off by < 1e-9."""
    toks = [t for t in text.replace(",", " ").split()]
    if not toks:
        raise ValidationError("empty permuton")
    vals = []
    for t in toks:
        try:
            v = float(t)
        except ValueError:
            raise ValidationError(f"{t!r} is not a number") from None
        if not (v > 0 and math.isfinite(v)):
            raise ValidationError(f"layer length {t} must be positive")
        vals.append(v)
    total = math.fsum(vals)
    if abs(total - 1.0) >= 1e-9:
        raise ValidationError(f"layer lengths sum to {total!r}; expected 1 (within 1e-9)")
    return LayeredPermuton.from_weights(vals)


def segments_csv(perm: LayeredPermuton) -> str:
    lines = ["x_start,x_end,y_start,y_end"]
    for row in perm.segments():
        lines.append(",".join(repr(v) for v in row))
    return "\n".join(lines) + "\n"
