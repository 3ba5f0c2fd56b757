"""Maximizing layered-pattern densities over layered permutons with K layers.

The density is a polynomial on the K-simplex.  Each start runs multiplicative
(mirror) ascent with a halving line search, drops layers shorter than
``prune_below`` and finishes with Newton steps on the KKT system of the
remaining support.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .exceptions import ValidationError
from .perm import LayeredPermuton, ShapeLike, as_shape
from .permuton import (
    density_value,
    permuton_density_gradient,
    permuton_density_hessian,
)

log = logging.getLogger(__name__)

GEOMETRIC_RATIOS = (0.3, 0.5, 0.7)
UNBOUNDED_RUN = 5
UNBOUNDED_INCREMENT = 1e-9
SHRINK_BELOW = 1e-6
SHRINK_GAP = 1e-3
NEAR_TIE = 1e-13


@dataclass(frozen=True)
class OptConfig:
    restarts: int = 16
    max_iters: int = 4000
    tol: float = 1e-9
    seed: int = 0
    prune_below: float = 1e-10
    dirichlet_alpha: float = 1.0
    threads: int = 1

    def to_dict(self) -> dict:
        return {
            "restarts": self.restarts,
            "max_iters": self.max_iters,
            "tol": self.tol,
            "seed": self.seed,
            "prune_below": self.prune_below,
            "dirichlet_alpha": self.dirichlet_alpha,
        }


@dataclass
class OptResult:
    lengths: LayeredPermuton
    value: float
    iterations: int
    restarts_used: int
    converged: bool
    pruned_layers: int
    K: int = 0
    agreeing_restarts: int = 0
    stationarity: float = 0.0

    def to_record(self) -> dict:
        return {
            "K": self.K,
            "value": self.value,
            "lengths": list(self.lengths.lengths),
            "iterations": self.iterations,
            "restarts_used": self.restarts_used,
            "agreeing_restarts": self.agreeing_restarts,
            "converged": self.converged,
            "pruned_layers": self.pruned_layers,
            "stationarity": self.stationarity,
        }


def projected_gradient_norm(sigma_shape: ShapeLike, x: Sequence[float]) -> float:
    """Infinity norm of the gradient projected onto the simplex tangent space."""
    g = permuton_density_gradient(sigma_shape, x)
    return float(np.max(np.abs(g - g.mean()))) if len(g) else 0.0


@dataclass
class _Run:
    x: np.ndarray
    value: float
    iterations: int
    pruned: int
    stationarity: float
    converged: bool


def _mirror_ascent(shape, x, cfg: OptConfig):
    f = density_value(shape, x)
    it = 0
    stall = 0
    while it < cfg.max_iters:
        g = permuton_density_gradient(shape, x)
        lam = float(g @ x)
        scale = float(np.max(np.abs(g)))
        if scale == 0.0:
            break
        u = (g - lam) / scale
        if float(np.max(x * np.abs(u))) * scale < cfg.tol * 1e-3:
            break
        eta = 1.0
        while True:
            y = x * np.exp(eta * u)
            y /= y.sum()
            fy = density_value(shape, y)
            if fy > f:
                break
            eta *= 0.5
            if eta < 1e-16:
                return x, f, it
        stall = stall + 1 if fy - f <= 1e-16 * abs(f) else 0
        x, f = y, fy
        it += 1
        if stall >= 25:
            break
    return x, f, it


def _newton_polish(shape, x, cfg: OptConfig, max_steps: int = 60):
    f = density_value(shape, x)
    pg = projected_gradient_norm(shape, x)
    it = 0
    for _ in range(max_steps):
        if pg < cfg.tol * 1e-3:
            break
        K = len(x)
        g = permuton_density_gradient(shape, x)
        H = permuton_density_hessian(shape, x)
        M = np.zeros((K + 1, K + 1))
        M[:K, :K] = H
        M[:K, K] = -1.0
        M[K, :K] = 1.0
        rhs = np.concatenate([-g, [0.0]])
        try:
            d = np.linalg.solve(M, rhs)[:K]
        except np.linalg.LinAlgError:
            break
        step = 1.0
        while np.any(x + step * d <= 0):
            step *= 0.5
            if step < 1e-12:
                return x, f, it
        y = x + step * d
        y /= y.sum()
        fy = density_value(shape, y)
        pgy = projected_gradient_norm(shape, y)
        if fy < f - 1e-15 * max(abs(f), 1e-300) or pgy >= pg:
            break
        x, f, pg = y, fy, pgy
        it += 1
    return x, f, it


def _optimize_from(shape, x0: np.ndarray, cfg: OptConfig, chunk: int = 200) -> _Run:
    """Mirror ascent in chunks, trying a Newton finish after each chunk."""
    x = np.asarray(x0, dtype=float)
    x = x / x.sum()
    it = 0
    pruned = 0
    while True:
        budget = min(chunk, cfg.max_iters - it)
        x, f, more = _mirror_ascent(shape, x, replace(cfg, max_iters=max(budget, 0)))
        it += more
        keep = x >= cfg.prune_below
        if len(x) > 1:
            # A short layer whose gradient is clearly below the multiplier is
            # still shrinking geometrically; drop it instead of waiting.
            g = permuton_density_gradient(shape, x)
            lam = float(g @ x)
            keep &= ~((x < SHRINK_BELOW) & (g < lam * (1 - SHRINK_GAP)))
        if 0 < keep.sum() < len(x):
            pruned += int(len(x) - keep.sum())
            x = x[keep] / x[keep].sum()
            continue
        y, fy, steps = _newton_polish(shape, x, cfg)
        it += steps
        if fy >= f and np.all(y >= cfg.prune_below):
            x, f = y, fy
        if projected_gradient_norm(shape, x) < cfg.tol:
            break
        # more < budget means ascent stopped on its own; another chunk won't help
        if it >= cfg.max_iters or more < budget:
            break
    f = density_value(shape, x)
    pg = projected_gradient_norm(shape, x)
    return _Run(x, f, it, pruned, pg, pg < cfg.tol)


def _geometric(K: int, r: float, increasing: bool) -> np.ndarray:
    w = r ** np.arange(K, dtype=float)
    if increasing:
        w = w[::-1]
    return w / w.sum()


def initial_points(K: int, cfg: OptConfig) -> list[np.ndarray]:
    """Deterministic profiles followed by ``cfg.restarts`` Dirichlet draws."""
    pts = [np.full(K, 1.0 / K)]
    if K > 1:
        for r in GEOMETRIC_RATIOS:
            pts.append(_geometric(K, r, increasing=True))
            pts.append(_geometric(K, r, increasing=False))
    rng = np.random.default_rng(cfg.seed)
    for _ in range(cfg.restarts):
        pts.append(rng.dirichlet(np.full(K, cfg.dirichlet_alpha)))
    return pts


def _finish(runs: list[_Run], K: int) -> OptResult:
    top = max(r.value for r in runs)
    # Values within rounding of the top are ties; converged runs win those.
    near = [r for r in runs if r.value >= top - NEAR_TIE * max(abs(top), 1e-300)]
    if any(r.converged for r in near):
        near = [r for r in near if r.converged]
    top = max(r.value for r in near)
    best = min((r for r in near if r.value == top), key=lambda r: tuple(r.x))
    agree = sum(1 for r in runs if abs(r.value - best.value) <= 1e-9 * max(abs(best.value), 1e-300))
    lengths = LayeredPermuton.from_weights(best.x)
    return OptResult(
        lengths=lengths,
        value=best.value,
        iterations=sum(r.iterations for r in runs),
        restarts_used=len(runs),
        converged=best.converged,
        pruned_layers=best.pruned,
        K=K,
        agreeing_restarts=agree,
        stationarity=best.stationarity,
    )


def maximize_fixed_K(
    sigma_shape: ShapeLike,
    K: int,
    config: OptConfig | None = None,
    extra_starts: Iterable[Sequence[float]] = (),
) -> OptResult:
    """Best density of ``sigma_shape`` over layered permutons with K layers."""
    shape = as_shape(sigma_shape)
    cfg = config or OptConfig()
    if K < 1:
        raise ValidationError("K must be >= 1")
    if K < shape.layer_count:
        return OptResult(
            lengths=LayeredPermuton.from_weights([1.0] * K),
            value=0.0,
            iterations=0,
            restarts_used=0,
            converged=True,
            pruned_layers=0,
            K=K,
        )
    starts = initial_points(K, cfg) + [np.asarray(s, dtype=float) for s in extra_starts]
    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            runs = list(pool.map(lambda s: _optimize_from(shape, s, cfg), starts))
    else:
        runs = [_optimize_from(shape, s, cfg) for s in starts]
    res = _finish(runs, K)
    # Final value is recomputed from the stored (normalized) lengths.
    res.value = density_value(shape, res.lengths)
    return res


@dataclass
class SweepRow:
    K: int
    value: float
    argmax: LayeredPermuton
    increment: float | None
    pruned_layers: int
    converged: bool
    agreeing_restarts: int = 0

    def to_record(self) -> dict:
        return {
            "K": self.K,
            "value": self.value,
            "increment": self.increment,
            "pruned_layers": self.pruned_layers,
            "converged": self.converged,
            "agreeing_restarts": self.agreeing_restarts,
            "argmax": list(self.argmax.lengths),
        }


def _padded(x: Sequence[float], eps: float) -> list[np.ndarray]:
    x = list(x)
    out = []
    for pos in range(len(x) + 1):
        y = np.array(x[:pos] + [eps] + x[pos:])
        out.append(y / y.sum())
    return out


def sweep_K(
    sigma_shape: ShapeLike,
    K_min: int,
    K_max: int,
    config: OptConfig | None = None,
    pad_eps: float = 1e-6,
    progress=None,
) -> list[SweepRow]:
    """Fixed-K optima for K_min..K_max.

    Each K is also started from the previous optimum with a short layer
    inserted at every position.  The previous optimum is feasible in the
    closure of the K-simplex, so it is kept whenever the new search does
    worse; values are therefore non-decreasing in K.
    """
    shape = as_shape(sigma_shape)
    cfg = config or OptConfig()
    if K_min < 1 or K_max < K_min:
        raise ValidationError("need 1 <= K_min <= K_max")
    rows: list[SweepRow] = []
    prev: OptResult | None = None
    for K in range(K_min, K_max + 1):
        extra = []
        if prev is not None and prev.value > 0:
            x = list(prev.lengths.lengths)
            if len(x) == K - 1:
                extra = _padded(x, pad_eps)
            elif len(x) < K:
                extra = [np.asarray(x + [pad_eps] * (K - len(x)))]
        res = maximize_fixed_K(shape, K, cfg, extra)
        if prev is not None and res.value < prev.value:
            res = replace(prev, K=K)
        inc = None if not rows else res.value - rows[-1].value
        rows.append(
            SweepRow(K, res.value, res.lengths, inc, res.pruned_layers, res.converged, res.agreeing_restarts)
        )
        if progress is not None:
            progress(rows[-1])
        prev = res
    return rows


def diagnose_sweep(rows: Sequence[SweepRow]) -> str:
    """Heuristic label for a K-sweep; evidence only, never a proof."""
    incs = [r.increment for r in rows if r.increment is not None]
    run = 0
    for inc in incs:
        run = run + 1 if inc > UNBOUNDED_INCREMENT else 0
        if run >= UNBOUNDED_RUN:
            return "unbounded-layers evidence (heuristic)"
    if incs and all(inc <= UNBOUNDED_INCREMENT for inc in incs[-UNBOUNDED_RUN:]):
        return "plateau (bounded-layers evidence, heuristic)"
    return "inconclusive"


def plateau_K(rows: Sequence[SweepRow], atol: float = 1e-9) -> int | None:
    """First K after which every further increment is <= atol."""
    for i, row in enumerate(rows):
        if all((r.increment or 0.0) <= atol for r in rows[i + 1 :]):
            return row.K
    return None


def geometric_profile(K: int, r: float, orientation: str = "increasing") -> np.ndarray:
    """Normalized lengths proportional to r^i; ``increasing`` puts the longest layer last."""
    if orientation not in ("increasing", "decreasing"):
        raise ValidationError("orientation must be 'increasing' or 'decreasing'")
    return _geometric(K, r, orientation == "increasing")


def maximize_geometric(
    sigma_shape: ShapeLike, K: int, orientation: str = "increasing", xtol: float = 1e-10
) -> tuple[float, float]:
    """Best ratio r in (0, 1) for geometric layer profiles, and its density."""
    shape = as_shape(sigma_shape)
    if K < 1:
        raise ValidationError("K must be >= 1")
    geometric_profile(1, 0.5, orientation)  # validates orientation
    if K == 1:
        return 0.5, density_value(shape, [1.0])
    lo, hi = 1e-4, 1.0 - 1e-9

    def neg(r):
        return -density_value(shape, geometric_profile(K, r, orientation))

    grid = np.linspace(lo, hi, 401)
    vals = [neg(r) for r in grid]
    i = int(np.argmin(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = minimize_scalar(neg, bounds=(a, b), method="bounded", options={"xatol": xtol})
    r = float(res.x) if res.fun <= vals[i] else float(grid[i])
    return r, -neg(r)


@dataclass
class StationarityReport:
    n: int
    x1: float
    x2: float
    sigma1: float
    x1_ge_x2: bool
    x1_ge_n_x2: bool
    sigma1_le_x1_over_n: bool
    slack: float
    notes: list[str] = field(default_factory=list)

    def to_record(self) -> dict:
        return {
            "n": self.n,
            "x1": self.x1,
            "x2": self.x2,
            "sigma1": self.sigma1,
            "x1_ge_x2": self.x1_ge_x2,
            "x1_ge_n_x2": self.x1_ge_n_x2,
            "sigma1_le_x1_over_n": self.sigma1_le_x1_over_n,
            "slack": self.slack,
            "notes": self.notes,
        }


def stationarity_report(
    sigma_shape: ShapeLike, result: OptResult, slack: float = 1e-8
) -> StationarityReport:
    """Check x1 >= x2, x1 >= n x2 and Sigma_1 <= x1/n at an optimum for (n, 1, ...).

    The first two follow from swapping or shifting mass between the first two
    layers, which keeps K fixed.  The third is informational: its argument
    merges two layers and so leaves the fixed-K family.
    """
    from .bounds import sigma_sums

    shape = as_shape(sigma_shape)
    if shape.layer_count < 2 or shape[1] != 1:
        raise ValidationError("pattern must have the form (n, 1, ...)")
    n = shape[0]
    tail = shape.layer_sizes[2:]
    x = np.asarray(result.lengths.lengths)
    notes = ["sigma1_le_x1_over_n is informational at fixed K"]
    if len(x) < 2:
        raise ValidationError("optimum has fewer than two layers")
    x1, x2 = float(x[0]), float(x[1])
    sums = sigma_sums(tail, x, n)
    if sums.degenerate:
        notes.append("fewer than k+2 layers: Sigma sums degenerate")
    return StationarityReport(
        n=n,
        x1=x1,
        x2=x2,
        sigma1=sums.s1,
        x1_ge_x2=x1 >= x2 - slack,
        x1_ge_n_x2=x1 >= n * x2 - slack,
        sigma1_le_x1_over_n=sums.s1 <= x1 / n + slack,
        slack=slack,
        notes=notes,
    )
