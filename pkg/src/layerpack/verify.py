"""Reproducible checks behind ``layerpack verify-paper``.

Each check returns a :class:`CheckResult`.  Random instances are drawn from
``numpy.random.default_rng([seed, number])`` so every check is reproducible
on its own and independent of which other checks run.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import bounds
from .counting import (
    best_layered_of_order,
    count_bruteforce,
    count_layered,
    merge_hypotheses_hold,
    merge_layers,
)
from .exceptions import ValidationError
from .optimizer import OptConfig, maximize_geometric, plateau_K, sweep_K
from .perm import LayeredShape, Permutation, canonical_decomposition, compositions, realize
from .permuton import (
    condprob_bound_check,
    density_value,
    estimate_density,
    permuton_density_gradient,
    sample_permutations,
)

PACKING_132 = 2 * math.sqrt(3) - 3

# Fixed (pattern, layer lengths) grid for the sampler check.
MC_GRID = (
    ((1, 3, 2), (1 / 3, 2 / 3)),
    ((2, 1), (1.0,)),
    ((1, 2), (0.5, 0.5)),
    ((2, 1, 4, 3), (0.5, 0.5)),
    ((1, 3, 2), (0.2, 0.3, 0.5)),
    ((2, 1, 3), (0.6, 0.4)),
    ((3, 2, 1), (0.7, 0.2, 0.1)),
    ((1, 2, 3), (0.25, 0.25, 0.25, 0.25)),
    ((2, 1, 3, 5, 4), (0.4, 0.1, 0.5)),
    ((2, 3, 1), (0.5, 0.5)),
)

MERGE_PATTERNS = ((2, 2), (2, 1, 2), (2, 2, 2), (3, 3), (3, 2, 3))
CONDPROB_PATTERNS = ((1, 2), (2, 2), (2, 1, 2))
REMARK_HOST = tuple(range(16, 0, -1)) + (17, 19, 20, 18)


@dataclass
class CheckResult:
    key: str
    number: int
    title: str
    holds: bool
    measured: dict
    threshold: dict
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def to_record(self, timing: bool = False) -> dict:
        rec = {
            "name": self.key,
            "number": self.number,
            "lhs": self.measured,
            "rhs": self.threshold,
            "holds": self.holds,
            "ref": self.title,
            "detail": self.detail,
        }
        if timing:
            rec["seconds"] = round(self.seconds, 3)
        return rec

    def line(self) -> str:
        status = "PASS" if self.holds else "FAIL"
        return f"[{status}] {self.number:2d} {self.key}: {self.title}"


def _rng(seed: int, number: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), number])


def _random_composition(rng: np.random.Generator, n: int) -> tuple[int, ...]:
    p = rng.uniform(0.02, 0.98)
    cuts = np.flatnonzero(rng.random(n - 1) < p) + 1
    edges = np.concatenate([[0], cuts, [n]])
    return tuple(int(v) for v in np.diff(edges))


# -- 1 ---------------------------------------------------------------------


def check_oracle(max_pattern: int = 4, max_host: int = 8) -> CheckResult:
    cases = 0
    bad = []
    for m in range(1, max_pattern + 1):
        for sigma in compositions(m):
            s = realize(sigma)
            for n in range(1, max_host + 1):
                for host in compositions(n):
                    fast = count_layered(sigma, host)
                    slow = count_bruteforce(s, realize(host))
                    cases += 1
                    if fast != slow:
                        bad.append({"pattern": list(sigma), "host": list(host), "dp": fast, "bruteforce": slow})
    return CheckResult(
        "oracle",
        1,
        "layered counting DP equals brute force on every small case",
        not bad,
        {"cases": cases, "mismatches": len(bad)},
        {"mismatches": 0},
        {"first_mismatches": bad[:5]},
    )


# -- 2 ---------------------------------------------------------------------


def check_packing_132(K_geometric: int = 40, K_sweep: int = 8, config: OptConfig | None = None) -> CheckResult:
    r, value = maximize_geometric((1, 2), K_geometric)
    rows = sweep_K((1, 2), 1, K_sweep, config)
    geo_vals = [maximize_geometric((1, 2), K)[1] for K in range(2, K_geometric + 1)]
    top_sweep = max(row.value for row in rows)
    top_geo = max(geo_vals)
    ok_low = value >= PACKING_132 - 1e-3
    ok_high = top_sweep <= PACKING_132 + 1e-9 and top_geo <= PACKING_132 + 1e-9
    return CheckResult(
        "packing-132",
        2,
        "geometric profile reaches 2*sqrt(3)-3 and no K-layer optimum exceeds it",
        bool(ok_low and ok_high),
        {
            "geometric_value": value,
            "geometric_ratio": r,
            "max_sweep_value": top_sweep,
            "max_geometric_value": top_geo,
        },
        {"geometric_value_min": PACKING_132 - 1e-3, "value_max": PACKING_132 + 1e-9},
        {"sweep": [row.to_record() for row in rows]},
    )


# -- 3 ---------------------------------------------------------------------


def check_counterexample_chain(horizon: int = 100) -> CheckResult:
    if horizon < 13:
        raise ValidationError("horizon must be >= 13")
    rows = [bounds.n0_13_chain(n) for n in range(13, horizon + 1)]
    failing = [row.n for row in rows if not all(row.holds.values())]
    n0 = bounds.find_n0((2,), bounds.packing_density_132(), horizon=max(horizon, 13))
    holds = not failing and n0.n0 == 13 and n0.persistent
    return CheckResult(
        "counterexample",
        3,
        f"closing estimates for (n,1,2) hold for n = 13..{horizon}; first contradiction at n = 13",
        bool(holds),
        {"rows": len(rows), "failing_n": failing, "n0": n0.n0, "persistent": n0.persistent},
        {
            "lower_bound": "> 0.33 C(n+3,n)/n^3",
            "upper_estimate": "< 0.19 C(n+3,n)/n^3",
            "lower_bound_vs_rhs_bound": ">",
            "n0": 13,
        },
        {"precision_digits": bounds.PRECISION_DPS, "rows": [row.to_record() for row in rows]},
    )


# -- 4 ---------------------------------------------------------------------


def check_unbounded_sweep(K_min: int = 3, K_max: int = 12, config: OptConfig | None = None, progress=None) -> CheckResult:
    rows = sweep_K((13, 1, 2), K_min, K_max, config, progress=progress)
    incs = [row.increment for row in rows if row.increment is not None]
    small = [row.K for row in rows if row.increment is not None and not row.increment > 1e-10]
    unconverged = [row.K for row in rows if not row.converged]
    return CheckResult(
        "sweep-13-1-2",
        4,
        f"K-layer optima for (13,1,2), K = {K_min}..{K_max}: converged with increments > 1e-10",
        not small and not unconverged,
        {"min_increment": min(incs) if incs else None, "K_below_threshold": small, "K_unconverged": unconverged},
        {"increment_min": 1e-10},
        {"sweep": [row.to_record() for row in rows]},
    )


# -- 5 ---------------------------------------------------------------------


def check_bounded_layers(K_max: int = 8, config: OptConfig | None = None) -> CheckResult:
    measured = {}
    detail = {}
    ok = True
    for shape in ((2, 2), (2, 1, 2)):
        rows = sweep_K(shape, 1, K_max, config)
        top = max(row.value for row in rows)
        first = next(row.K for row in rows if row.value >= top - 1e-9)
        later = [row.increment for row in rows if row.K > first]
        plateau = plateau_K(rows)
        kb = bounds.merge_constants(shape, bounds.big_layer_C(shape)).K_bound
        good = all(inc <= 1e-9 for inc in later) and plateau is not None and plateau <= kb
        key = ",".join(map(str, shape))
        if shape == (2, 2):
            v2 = next(row.value for row in rows if row.K == 2)
            measured["K2_value_2,2"] = v2
            good = good and abs(v2 - 0.375) <= 1e-10
        measured[f"plateau_K_{key}"] = plateau
        measured[f"max_later_increment_{key}"] = max(later) if later else 0.0
        measured[f"K_bound_{key}"] = str(kb)
        detail[key] = [row.to_record() for row in rows]
        ok = ok and good
    return CheckResult(
        "bounded-layers",
        5,
        "(2,2) and (2,1,2) optima stop improving at a small K",
        ok,
        measured,
        {"later_increment_max": 1e-9, "K2_value_2,2": "0.375 +- 1e-10", "plateau_K": "<= K_bound"},
        detail,
    )


# -- 6 ---------------------------------------------------------------------


def check_claims(ns=(5, 13, 20), K_min: int = 4, K_max: int = 8, config: OptConfig | None = None) -> CheckResult:
    checked = 0
    bad = []
    skipped = []
    detail = {}
    for n in ns:
        rows = sweep_K((n, 1, 2), K_min, K_max, config)
        detail[str(n)] = [row.to_record() for row in rows]
        for row in rows:
            if not row.converged:
                skipped.append({"n": n, "K": row.K})
                continue
            x = row.argmax.lengths
            checked += 1
            if not (x[0] >= x[1] - 1e-8 and x[0] >= n * x[1] - 1e-8):
                bad.append({"n": n, "K": row.K, "x1": x[0], "x2": x[1]})
    return CheckResult(
        "claims",
        6,
        "first layer dominates the second at (n,1,2) optima",
        not bad and checked > 0,
        {"optima_checked": checked, "violations": bad, "unconverged": skipped},
        {"x1 >= x2 - 1e-8": True, "x1 >= n x2 - 1e-8": True},
        detail,
    )


# -- 7 ---------------------------------------------------------------------


def check_condprob(trials: int = 1000, seed: int = 0, max_exhaustive: int = 8, max_order: int = 200) -> CheckResult:
    exhaustive = 0
    failures = []
    for n in range(1, max_exhaustive + 1):
        for host in compositions(n):
            p = realize(host)
            for sigma in CONDPROB_PATTERNS:
                if sum(sigma) > n:
                    continue
                exhaustive += 1
                if not condprob_bound_check(sigma, p).holds:
                    failures.append({"pattern": list(sigma), "host": list(host)})
    rng = _rng(seed, 7)
    passed = 0
    for _ in range(trials):
        n = int(rng.integers(5, max_order + 1))
        host = _random_composition(rng, n)
        p = realize(host)
        ok = True
        for sigma in CONDPROB_PATTERNS:
            res = condprob_bound_check(sigma, p)
            if not res.holds:
                ok = False
                failures.append({"pattern": list(sigma), "host": list(host), "lhs": str(res.lhs)})
        passed += ok
    return CheckResult(
        "condprob",
        7,
        "layered embedding changes a pattern density by at most |sigma|^2/|pi|",
        not failures,
        {"exhaustive_cases": exhaustive, "random_passed": f"{passed}/{trials}", "failures": len(failures)},
        {"failures": 0},
        {"first_failures": failures[:5]},
    )


# -- 8 ---------------------------------------------------------------------


def _merge_instance(rng: np.random.Generator, sigma: tuple[int, ...]):
    C = bounds.big_layer_C(sigma)
    mc = bounds.merge_constants(sigma, C)
    c = mc.c
    k = len(sigma)
    small_cap = int(rng.integers(2 * sigma[0] + 2, 60))
    # Order large enough that layers of size small_cap are at most c |pi|.
    N = int(bounds.CTX.ceil(small_cap / c)) + int(rng.integers(0, 1000))
    n_small = int(rng.integers(2, 7))
    # A third of the runs use tiny layers so merged sizes below l_1 occur too.
    top = small_cap if rng.random() < 2 / 3 else max(1, sigma[0] // 2)
    small = [int(v) for v in rng.integers(1, top + 1, size=n_small)]
    n_big = k + int(rng.integers(0, 3))
    rest = N - sum(small)
    cuts = np.sort(rng.choice(np.arange(1, 1000), size=n_big - 1, replace=False)) if n_big > 1 else np.array([], dtype=int)
    frac = np.diff(np.concatenate([[0], cuts, [1000]]))
    big = [rest * int(f) // 1000 for f in frac]
    big[-1] += rest - sum(big)
    # Keep the small layers adjacent in a random run, then scatter big layers.
    run_at = int(rng.integers(0, n_big + 1))
    sizes = big[:run_at] + small + big[run_at:]
    index = run_at + int(rng.integers(0, n_small - 1)) + 1  # 1-based, both layers small
    return LayeredShape(tuple(sizes)), index, C, c


def check_merge(instances: int = 100, seed: int = 0) -> CheckResult:
    rng = _rng(seed, 8)
    failures = []
    strict_cases = 0
    done = 0
    attempts = 0
    while done < instances:
        attempts += 1
        if attempts > 50 * instances:
            break
        sigma = MERGE_PATTERNS[int(rng.integers(len(MERGE_PATTERNS)))]
        pi, index, C, c = _merge_instance(rng, sigma)
        if not merge_hypotheses_hold(sigma, pi, index, C, c):
            continue
        done += 1
        before = count_layered(sigma, pi)
        after = count_layered(sigma, merge_layers(pi, index))
        merged = pi[index - 1] + pi[index]
        if after < before:
            failures.append({"pattern": list(sigma), "index": index, "reason": "decreased"})
        if merged >= sigma[0]:
            strict_cases += 1
            if after <= before:
                failures.append({"pattern": list(sigma), "index": index, "reason": "not strict"})
    return CheckResult(
        "merge",
        8,
        "merging two short adjacent layers never lowers the count",
        not failures and done == instances,
        {"instances": done, "strict_cases": strict_cases, "failures": len(failures)},
        {"failures": 0, "instances": instances},
        {"patterns": [list(s) for s in MERGE_PATTERNS], "first_failures": failures[:5]},
    )


# -- 9 ---------------------------------------------------------------------


def check_remark() -> CheckResult:
    host = Permutation(REMARK_HOST)
    count = count_bruteforce(realize((4, 1)), host)
    best = best_layered_of_order((4, 1), 20)
    layered = isinstance(canonical_decomposition(host), LayeredShape)
    return CheckResult(
        "remark",
        9,
        "a non-layered order-20 permutation matches the best layered count of 43215",
        count == best.best_count and not layered,
        {"host_count": str(count), "best_layered_count": str(best.best_count), "host_is_layered": layered},
        {"host_count": "== best_layered_count"},
        {"host": list(REMARK_HOST), "best_shapes": [list(s) for s in best.ties]},
    )


# -- 10 --------------------------------------------------------------------


def check_gradient(instances: int = 100, seed: int = 0, step: float = 1e-6) -> CheckResult:
    rng = _rng(seed, 10)
    worst_rel = 0.0
    bad = []
    for _ in range(instances):
        k = int(rng.integers(1, 5))
        sigma = tuple(int(v) for v in rng.integers(1, 4, size=k))
        K = int(rng.integers(k, 13))
        x = rng.dirichlet(np.ones(K))
        g = permuton_density_gradient(sigma, x)
        for t in range(K):
            e = np.zeros(K)
            e[t] = step
            fd = (density_value(sigma, x + e) - density_value(sigma, x - e)) / (2 * step)
            err = abs(g[t] - fd)
            rel = err / abs(fd) if fd != 0 else math.inf
            if err > 1e-9:
                worst_rel = max(worst_rel, rel)
            if not (err <= 1e-9 or rel <= 1e-6):
                bad.append({"pattern": list(sigma), "K": K, "t": t, "analytic": g[t], "fd": fd})
    return CheckResult(
        "gradient",
        10,
        "analytic gradient matches central differences",
        not bad,
        {"instances": instances, "worst_relative_error": worst_rel, "violations": len(bad)},
        {"relative": 1e-6, "absolute": 1e-9, "step": step},
        {"first_violations": bad[:5]},
    )


# -- 11 --------------------------------------------------------------------


def check_monte_carlo(trials: int = 10**6, samples: int = 10**5, seed: int = 0) -> CheckResult:
    rows = []
    ok = True
    for i, (sigma, x) in enumerate(MC_GRID):
        shape = canonical_decomposition(sigma)
        # non-layered patterns never occur in a layered permuton
        exact = density_value(shape, x) if isinstance(shape, LayeredShape) else 0.0
        stats = estimate_density(sigma, x, trials, seed=[int(seed), 11, i])
        good = stats.within(exact, 4.0)
        ok = ok and good
        rows.append(
            {
                "pattern": list(sigma),
                "lengths": list(x),
                "exact": exact,
                "estimate": stats.estimate,
                "std_error": stats.std_error,
                "within_4se": good,
            }
        )
    non_layered = 0
    profiles = [x for _, x in MC_GRID]
    per = samples // len(profiles)
    drawn = 0
    for i, x in enumerate(profiles):
        size = per if i < len(profiles) - 1 else samples - drawn
        batch = sample_permutations(x, 7, size, seed=[int(seed), 11, 100 + i])
        drawn += size
        for row in batch:
            if not isinstance(canonical_decomposition(Permutation(tuple(row))), LayeredShape):
                non_layered += 1
    return CheckResult(
        "monte-carlo",
        11,
        "sampled densities agree with the formula; sampled permutations are layered",
        ok and non_layered == 0,
        {"grid_within_4se": sum(r["within_4se"] for r in rows), "non_layered_samples": non_layered, "samples": drawn},
        {"grid_within_4se": len(MC_GRID), "non_layered_samples": 0, "trials": trials},
        {"grid": rows},
    )


CHECKS: dict[str, Callable[..., CheckResult]] = {
    "oracle": check_oracle,
    "packing-132": check_packing_132,
    "counterexample": check_counterexample_chain,
    "sweep-13-1-2": check_unbounded_sweep,
    "bounded-layers": check_bounded_layers,
    "claims": check_claims,
    "condprob": check_condprob,
    "merge": check_merge,
    "remark": check_remark,
    "gradient": check_gradient,
    "monte-carlo": check_monte_carlo,
}


def run_checks(
    only=None,
    horizon: int = 100,
    trials: int | None = None,
    seed: int = 0,
    config: OptConfig | None = None,
    progress=None,
) -> list[CheckResult]:
    """Run the named checks (all by default) in their fixed order.

    ``trials`` sets the random-instance count of the property checks
    (condprob, merge, gradient); defaults are 1000, 100 and 100.
    """
    keys = list(CHECKS) if not only else list(only)
    for key in keys:
        if key not in CHECKS:
            raise ValidationError(f"unknown check {key!r}; choose from {', '.join(CHECKS)}")
    keys = [k for k in CHECKS if k in keys]
    out = []
    for key in keys:
        if progress:
            progress(f"running {key}")
        t0 = time.perf_counter()
        if key == "counterexample":
            res = check_counterexample_chain(horizon)
        elif key == "condprob":
            res = check_condprob(trials or 1000, seed)
        elif key == "merge":
            res = check_merge(trials or 100, seed)
        elif key == "gradient":
            res = check_gradient(trials or 100, seed)
        elif key == "monte-carlo":
            res = check_monte_carlo(seed=seed)
        elif key in ("packing-132", "bounded-layers", "claims", "sweep-13-1-2"):
            res = CHECKS[key](config=config)
        else:
            res = CHECKS[key]()
        res.seconds = time.perf_counter() - t0
        if progress:
            progress(res.line())
        out.append(res)
    return out
