"""Input checks shared by the estimator wrappers and the command line."""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .exceptions import ValidationError
from .perm import LayeredPermuton, LayeredShape, Permutation, as_permutation, as_shape


def check_shape(shape, name: str = "pattern") -> LayeredShape:
    try:
        return as_shape(shape)
    except ValidationError as exc:
        raise ValidationError(f"{name}: {exc}") from None
    except (TypeError, ValueError):
        raise ValidationError(f"{name}: expected layer sizes, got {shape!r}") from None


def check_permutation(p, name: str = "permutation") -> Permutation:
    try:
        return as_permutation(p)
    except ValidationError as exc:
        raise ValidationError(f"{name}: {exc}") from None
    except (TypeError, ValueError):
        raise ValidationError(f"{name}: expected one-line notation, got {p!r}") from None


def check_lengths(x, name: str = "lengths") -> LayeredPermuton:
    """Layer lengths that must already lie on the simplex."""
    if isinstance(x, LayeredPermuton):
        return x
    try:
        vals = [float(v) for v in x]
    except (TypeError, ValueError):
        raise ValidationError(f"{name}: expected a sequence of numbers") from None
    try:
        return LayeredPermuton(tuple(vals))
    except ValidationError as exc:
        raise ValidationError(f"{name}: {exc}") from None


def check_positive_int(v, name: str, minimum: int = 1) -> int:
    if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
        raise ValidationError(f"{name} must be an integer, got {v!r}")
    if v < minimum:
        raise ValidationError(f"{name} must be >= {minimum}, got {v}")
    return int(v)


def check_tolerance(v, name: str = "tol") -> float:
    v = float(v)
    if not (v > 0 and math.isfinite(v)):
        raise ValidationError(f"{name} must be a positive finite number")
    return v


def check_permutation_batch(X) -> list[Permutation]:
    """Rows of ``X`` as permutations; rows may have different orders."""
    if isinstance(X, np.ndarray) and X.ndim == 2:
        rows: Sequence = X.tolist()
    elif isinstance(X, (str, Permutation)):
        raise ValidationError("expected a batch of permutations, got a single one")
    else:
        rows = list(X)
    if not rows:
        raise ValidationError("empty batch")
    return [check_permutation(r, name=f"row {i}") for i, r in enumerate(rows)]


def check_lengths_batch(X) -> list[LayeredPermuton]:
    if isinstance(X, np.ndarray) and X.ndim == 1:
        raise ValidationError("expected a 2-D batch of layer-length vectors")
    rows = list(X)
    if not rows:
        raise ValidationError("empty batch")
    return [check_lengths(r, name=f"row {i}") for i, r in enumerate(rows)]
