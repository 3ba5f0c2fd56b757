"""Permutations, layered shapes and finite-layer permutons.

Positions and values are 1-indexed in the public API (one-line notation).
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence, Union

from .exceptions import ValidationError

# Permuton lengths must sum to one within this tolerance.
SIMPLEX_TOL = 1e-12


def _tokens(text: str) -> list[tuple[int, str]]:
    """Split on commas/whitespace, keeping the 1-based column of each token."""
    out = []
    for match in re.finditer(r"[^\s,]+", text):
        out.append((match.start() + 1, match.group()))
    return out


@dataclass(frozen=True)
class Permutation:
    values: tuple[int, ...]

    def __post_init__(self):
        values = tuple(int(v) for v in self.values)
        object.__setattr__(self, "values", values)
        n = len(values)
        if n < 1:
            raise ValidationError("a permutation must have order >= 1")
        seen = set()
        for v in values:
            if v in seen:
                raise ValidationError(f"value {v} is repeated")
            seen.add(v)
        missing = [v for v in range(1, n + 1) if v not in seen]
        if missing:
            extra = sorted(v for v in seen if not 1 <= v <= n)
            raise ValidationError(
                f"value {missing[0]} is missing"
                + (f" (found out-of-range value {extra[0]})" if extra else "")
            )

    @property
    def order(self) -> int:
        return len(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, i):
        return self.values[i]

    def __str__(self) -> str:
        return " ".join(map(str, self.values))


@dataclass(frozen=True)
class LayeredShape:
    """Layer sizes (l_1, ..., l_k) of a layered permutation."""

    layer_sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if not sizes:
            raise ValidationError("a layered shape needs at least one layer")
        for j, s in enumerate(sizes, 1):
            if s < 1:
                raise ValidationError(f"layer {j} has size {s}; sizes must be >= 1")

    @property
    def order(self) -> int:
        return sum(self.layer_sizes)

    @property
    def layer_count(self) -> int:
        return len(self.layer_sizes)

    def __len__(self) -> int:
        return len(self.layer_sizes)

    def __iter__(self):
        return iter(self.layer_sizes)

    def __getitem__(self, i):
        return self.layer_sizes[i]

    def __str__(self) -> str:
        return ",".join(map(str, self.layer_sizes))


@dataclass(frozen=True)
class LayeredPermuton:
    """Layered permuton with finitely many (hence non-trivial) layers."""

    lengths: tuple[float, ...]

    def __post_init__(self):
        lengths = tuple(float(x) for x in self.lengths)
        object.__setattr__(self, "lengths", lengths)
        if not lengths:
            raise ValidationError("a layered permuton needs at least one layer")
        for i, x in enumerate(lengths, 1):
            if not (x > 0 and math.isfinite(x)):
                raise ValidationError(f"layer {i} has length {x}; lengths must be positive")
        total = math.fsum(lengths)
        if abs(total - 1.0) > SIMPLEX_TOL:
            raise ValidationError(f"layer lengths sum to {total!r}, not 1")

    @classmethod
    def from_weights(cls, weights: Iterable[float]) -> "LayeredPermuton":
        w = [float(x) for x in weights]
        total = math.fsum(w)
        if not total > 0:
            raise ValidationError("weights must have a positive sum")
        return cls(tuple(x / total for x in w))

    @property
    def layer_count(self) -> int:
        return len(self.lengths)

    def __len__(self) -> int:
        return len(self.lengths)

    def __iter__(self):
        return iter(self.lengths)

    def __getitem__(self, i):
        return self.lengths[i]

    def segments(self) -> list[tuple[float, float, float, float]]:
        """Support segments (x_start, x_end, y_start, y_end), one per layer.

        A layer [a, b] carries the slope -1 segment from (a, b) to (b, a).
        """
        rows = []
        a = 0.0
        for x in self.lengths:
            b = a + x
            rows.append((a, b, b, a))
            a = b
        return rows


@dataclass(frozen=True)
class NotLayered:
    """Result of decomposing a non-layered permutation.

    ``witness`` holds 1-based positions i < j < k inducing ``pattern``.
    """

    witness: tuple[int, int, int]
    pattern: tuple[int, int, int]

    def __bool__(self) -> bool:
        return False


PermLike = Union[Permutation, Sequence[int], str]
ShapeLike = Union[LayeredShape, Sequence[int], str]


def parse_permutation(text: str) -> Permutation:
    """Parse one-line notation, e.g. ``"2 1 4 3"`` or ``"2,1,4,3"``."""
    toks = _tokens(text)
    if not toks:
        raise ValidationError("empty permutation")
    values = []
    for col, tok in toks:
        try:
            v = int(tok)
        except ValueError:
            raise ValidationError(f"column {col}: {tok!r} is not an integer") from None
        if v < 1:
            raise ValidationError(f"column {col}: {v} is not a positive integer")
        values.append(v)
    return Permutation(tuple(values))


def parse_shape(text: str) -> LayeredShape:
    """Parse comma-separated layer sizes, e.g. ``"13,1,2"``."""
    toks = _tokens(text)
    if not toks:
        raise ValidationError("empty layer shape")
    sizes = []
    for col, tok in toks:
        try:
            sizes.append(int(tok))
        except ValueError:
            raise ValidationError(f"column {col}: {tok!r} is not an integer") from None
        if sizes[-1] < 1:
            raise ValidationError(f"column {col}: layer size {sizes[-1]} must be >= 1")
    return LayeredShape(tuple(sizes))


def as_permutation(p: PermLike) -> Permutation:
    if isinstance(p, Permutation):
        return p
    if isinstance(p, str):
        return parse_permutation(p)
    return Permutation(tuple(int(v) for v in p))


def as_shape(s: ShapeLike) -> LayeredShape:
    if isinstance(s, LayeredShape):
        return s
    if isinstance(s, str):
        return parse_shape(s)
    return LayeredShape(tuple(int(v) for v in s))


def realize(shape: ShapeLike) -> Permutation:
    """The layered permutation with the given layer sizes."""
    shape = as_shape(shape)
    values = []
    top = 0
    for size in shape:
        top += size
        values.extend(range(top, top - size, -1))
    return Permutation(tuple(values))


def _find_231_312(values: Sequence[int]) -> NotLayered | None:
    n = len(values)
    for i, j, k in combinations(range(n), 3):
        a, b, c = values[i], values[j], values[k]
        if c < a < b:
            return NotLayered((i + 1, j + 1, k + 1), (2, 3, 1))
        if b < c < a:
            return NotLayered((i + 1, j + 1, k + 1), (3, 1, 2))
    return None


def canonical_decomposition(p: PermLike) -> LayeredShape | NotLayered:
    """Layer sizes of ``p``, or a :class:`NotLayered` witness.

    A layered permutation splits into maximal decreasing runs where each run
    occupies exactly the next block of values.
    """
    p = as_permutation(p)
    values = p.values
    sizes = []
    start = 0
    low = 0  # values 1..low are used by earlier layers
    n = len(values)
    while start < n:
        end = start + 1
        while end < n and values[end] == values[end - 1] - 1:
            end += 1
        size = end - start
        if values[start] != low + size:
            return _find_231_312(values)
        sizes.append(size)
        low += size
        start = end
    return LayeredShape(tuple(sizes))


def is_layered(p: PermLike) -> bool:
    return isinstance(canonical_decomposition(p), LayeredShape)


def induced_pattern(p: PermLike, indices: Sequence[int]) -> Permutation:
    """Pattern induced by the 1-based, strictly increasing ``indices``."""
    p = as_permutation(p)
    idx = [int(i) for i in indices]
    if not idx:
        raise ValidationError("indices must be nonempty")
    for a, b in zip(idx, idx[1:]):
        if b <= a:
            raise ValidationError(f"indices must be strictly increasing ({a} then {b})")
    if idx[0] < 1 or idx[-1] > p.order:
        raise ValidationError(f"indices must lie in 1..{p.order}")
    vals = [p.values[i - 1] for i in idx]
    ranks = {v: r for r, v in enumerate(sorted(vals), 1)}
    return Permutation(tuple(ranks[v] for v in vals))


def compositions(n: int):
    """All compositions of ``n`` in lexicographic order."""
    if n == 0:
        yield ()
        return
    for first in range(1, n + 1):
        for rest in compositions(n - first):
            yield (first,) + rest
