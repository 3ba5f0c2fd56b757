"""Command-line front end.

    layerpack count --pattern "1 3 2" --host "2 1 5 4 3"
    layerpack density --pattern 1,2 --lengths 0.3333333333333333,0.6666666666666667
    layerpack optimize --pattern 2,2 --K 2
    layerpack optimize --pattern 13,1,2 --sweep 3:12 --format csv
    layerpack exact --pattern 2,2 --n 8
    layerpack sample --lengths 0.5,0.5 --m 4 --size 5 --seed 1
    layerpack embed --perm "2 1 4 3" --segments
    layerpack bounds analysis --n 13 --tail 2
    layerpack verify-paper --only counterexample

JSON goes to stdout (or --output); progress and pass/fail lines go to stderr.
Exit codes: 0 ok, 2 invalid input, 3 resource guard, 4 verification
failure, 5 optimizer did not converge.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
from fractions import Fraction

from . import __version__, bounds
from .counting import (
    BRUTEFORCE_GUARD,
    SYMMETRIC_GUARD,
    best_layered_of_order,
    count_bruteforce,
    count_fast,
    sigma_optimal_bruteforce,
)
from .exceptions import ResourceGuardError, ValidationError
from .optimizer import (
    OptConfig,
    diagnose_sweep,
    geometric_profile,
    maximize_fixed_K,
    maximize_geometric,
    plateau_K,
    sweep_K,
)
from .perm import (
    LayeredShape,
    canonical_decomposition,
    is_layered,
    parse_permutation,
    parse_shape,
    realize,
)
from .permuton import (
    embed_permutation,
    estimate_density,
    parse_permuton,
    permuton_density,
    permuton_density_gradient,
    sample_permutations,
    segments_csv,
)
from .verify import CHECKS, run_checks

SCHEMA_VERSION = 1
THREADS_ENV = "LAYERPACK_THREADS"

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_GUARD = 3
EXIT_VERIFY = 4
EXIT_NOT_CONVERGED = 5

def _frac(f: Fraction) -> dict:
    return {"num": str(f.numerator), "den": str(f.denominator)}


def _sweep_range(text: str) -> tuple[int, int]:
    try:
        a, b = text.split(":")
        lo, hi = int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A:B, got {text!r}") from None
    if lo < 1 or hi < lo:
        raise argparse.ArgumentTypeError("need 1 <= A <= B")
    return lo, hi


def _default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _opt_config(args) -> OptConfig:
    return OptConfig(
        restarts=args.restarts,
        max_iters=args.max_iters,
        tol=args.tol,
        seed=args.seed,
        threads=args.threads,
    )


def _progress(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


# -- commands ---------------------------------------------------------------


def cmd_count(args):
    if args.pattern is not None:
        sigma = parse_permutation(args.pattern)
    else:
        sigma = realize(parse_shape(args.pattern_shape))
    if args.host is not None:
        host = parse_permutation(args.host)
    else:
        host = realize(parse_shape(args.host_shape))
    both_layered = is_layered(sigma) and is_layered(host)
    if args.oracle or not is_layered(host):
        method = "bruteforce"
        count = count_bruteforce(sigma, host, guard=args.guard)
    else:
        method = "layered-dp" if both_layered else "layered-host"
        count = count_fast(sigma, host)
    result = {
        "pattern": str(sigma),
        "host_order": host.order,
        "method": method,
        "count": str(count),
    }
    if sigma.order <= host.order:
        result["density"] = _frac(Fraction(count, math.comb(host.order, sigma.order)))
    return result, EXIT_OK


def cmd_density(args):
    shape = parse_shape(args.pattern)
    perm = parse_permuton(args.lengths)
    d = permuton_density(shape, perm)
    result = {
        "pattern_shape": list(shape),
        "lengths": list(perm.lengths),
        "value": d.value,
        "multinomial_coefficient": str(d.multinomial_coefficient),
    }
    if args.gradient:
        result["gradient"] = [float(v) for v in permuton_density_gradient(shape, perm)]
    return result, EXIT_OK


def _geometric_rows(shape, lo, hi, orientation):
    rows = []
    prev = None
    for K in range(lo, hi + 1):
        r, value = maximize_geometric(shape, K, orientation)
        rows.append(
            {
                "K": K,
                "value": value,
                "ratio": r,
                "increment": None if prev is None else value - prev,
                "converged": True,
                "argmax": [float(v) for v in geometric_profile(K, r, orientation)],
            }
        )
        prev = value
    return rows


def _rows_csv(rows) -> str:
    buf = io.StringIO()
    cols = [c for c in rows[0] if c != "argmax"] + ["argmax"]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in rows:
        out = []
        for c in cols:
            v = row.get(c)
            if c == "argmax":
                v = " ".join(repr(x) for x in v)
            elif v is None:
                v = ""
            elif isinstance(v, float):
                v = repr(v)
            out.append(v)
        w.writerow(out)
    return buf.getvalue()


def cmd_optimize(args):
    shape = parse_shape(args.pattern)
    cfg = _opt_config(args)
    if args.sweep is None and args.K is None:
        raise ValidationError("give --K or --sweep A:B")
    if args.sweep is not None:
        lo, hi = args.sweep
        if args.geometric:
            rows = _geometric_rows(shape, lo, hi, args.orientation)
            label = "geometric profiles"
        else:
            def report(row):
                inc = "" if row.increment is None else f" increment={row.increment:.3e}"
                _progress(f"K={row.K} value={row.value!r}{inc} converged={row.converged}")

            sweep = sweep_K(shape, lo, hi, cfg, progress=report if args.progress else None)
            rows = [r.to_record() for r in sweep]
            label = diagnose_sweep(sweep)
        code = EXIT_OK if all(r["converged"] for r in rows) else EXIT_NOT_CONVERGED
        if args.format == "csv":
            return _rows_csv(rows), code
        result = {"pattern_shape": list(shape), "rows": rows, "diagnosis": label}
        if not args.geometric:
            result["plateau_K"] = plateau_K(sweep)
        return result, code
    if args.geometric:
        r, value = maximize_geometric(shape, args.K, args.orientation)
        return {
            "pattern_shape": list(shape),
            "K": args.K,
            "ratio": r,
            "value": value,
            "lengths": [float(v) for v in geometric_profile(args.K, r, args.orientation)],
        }, EXIT_OK
    res = maximize_fixed_K(shape, args.K, cfg)
    return {"pattern_shape": list(shape), **res.to_record()}, (EXIT_OK if res.converged else EXIT_NOT_CONVERGED)


def cmd_exact(args):
    shape = parse_shape(args.pattern)
    if args.all_permutations:
        best, witnesses = sigma_optimal_bruteforce(realize(shape), args.n, guard=args.guard or SYMMETRIC_GUARD)
        layered = [w for w in witnesses if is_layered(w)]
        return {
            "pattern_shape": list(shape),
            "n": args.n,
            "count": str(best),
            "maximizers": len(witnesses),
            "layered_maximizers": [str(w) for w in layered],
            "layered_witness_present": bool(layered),
        }, EXIT_OK
    res = best_layered_of_order(shape, args.n, pruned=args.pruned, guard=args.guard)
    return {"pattern_shape": list(shape), "n": args.n, "pruned": args.pruned, **res.to_record()}, EXIT_OK


def cmd_sample(args):
    perm = parse_permuton(args.lengths)
    if args.pattern is not None:
        sigma = parse_permutation(args.pattern)
        stats = estimate_density(sigma, perm, args.trials, seed=args.seed)
        dec = canonical_decomposition(sigma)
        exact = permuton_density(dec, perm).value if isinstance(dec, LayeredShape) else 0.0
        return {
            "pattern": str(sigma),
            "lengths": list(perm.lengths),
            "trials": stats.trials,
            "hits": stats.hits,
            "estimate": stats.estimate,
            "std_error": stats.std_error,
            "formula": exact,
            "within_4se": stats.within(exact, 4.0),
        }, EXIT_OK
    rows = sample_permutations(perm, args.m, args.size, seed=args.seed)
    return {
        "lengths": list(perm.lengths),
        "m": args.m,
        "permutations": [" ".join(str(int(v)) for v in row) for row in rows],
    }, EXIT_OK


def cmd_embed(args):
    p = parse_permutation(args.perm)
    perm = embed_permutation(p)
    if args.segments:
        return segments_csv(perm), EXIT_OK
    return {"permutation": str(p), "layer_sizes": list(canonical_decomposition(p)), "lengths": list(perm.lengths)}, EXIT_OK


def _d_prime(args):
    if args.d_prime is None:
        return bounds.packing_density_132()
    return args.d_prime


def cmd_bounds(args):
    kind = args.bounds_kind
    if kind == "analysis":
        tail = list(parse_shape(args.tail))
        return bounds.counterexample_analysis(args.n, tail, _d_prime(args)).to_record(), EXIT_OK
    if kind == "chain":
        rows = [bounds.n0_13_chain(n, args.d_prime).to_record() for n in range(args.n_min, args.n_max + 1)]
        return {"rows": rows, "all_hold": all(all(r["holds"].values()) for r in rows)}, EXIT_OK
    if kind == "n0":
        tail = list(parse_shape(args.tail))
        return bounds.find_n0(tail, _d_prime(args), args.horizon).to_record(), EXIT_OK
    if kind == "merge":
        shape = parse_shape(args.pattern)
        C = bounds.big_layer_C(shape) if args.C is None else args.C
        return {"pattern_shape": list(shape), **bounds.merge_constants(shape, C).to_record()}, EXIT_OK
    if kind == "thresholds":
        shape = parse_shape(args.pattern)
        return {"pattern_shape": list(shape), **bounds.structure_thresholds(shape, args.epsilon).to_record()}, EXIT_OK
    raise ValidationError(f"unknown bounds kind {kind!r}")


def cmd_verify(args):
    only = None
    if args.only:
        only = [k.strip() for chunk in args.only for k in chunk.split(",") if k.strip()]
    results = run_checks(
        only=only,
        horizon=args.horizon,
        trials=args.trials,
        seed=args.seed,
        config=_opt_config(args),
        progress=_progress,
    )
    records = [r.to_record(timing=args.timing) for r in results]
    ok = all(r.holds for r in results)
    return {
        "checks": records,
        "passed": sum(r.holds for r in results),
        "total": len(results),
        "all_pass": ok,
    }, (EXIT_OK if ok else EXIT_VERIFY)


# -- parser -----------------------------------------------------------------


def _add_opt_flags(p):
    p.add_argument("--restarts", type=int, default=16, help="random Dirichlet starts per K")
    p.add_argument("--max-iters", type=int, default=4000)
    p.add_argument("--tol", type=float, default=1e-9, help="projected-gradient tolerance")
    p.add_argument("--threads", type=int, default=_default_threads(), help=f"default from ${THREADS_ENV}")


def _add_common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", "-o", help="write the report here instead of stdout")
    p.add_argument("--config", help="key = value file presetting flags")
    p.add_argument("--timing", action="store_true", help="add wall-clock seconds to the report")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="layerpack", description="Layered pattern densities and packing bounds.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("count", help="count occurrences of a pattern in a permutation")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--pattern", help="pattern in one-line notation, e.g. '1 3 2'")
    g.add_argument("--pattern-shape", help="layered pattern as layer sizes, e.g. 1,2")
    h = p.add_mutually_exclusive_group(required=True)
    h.add_argument("--host", help="host permutation in one-line notation")
    h.add_argument("--host-shape", help="layered host as layer sizes")
    p.add_argument("--oracle", action="store_true", help="force brute-force counting")
    p.add_argument("--guard", type=int, default=BRUTEFORCE_GUARD, help="max host order for brute force")
    _add_common(p)
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("density", help="pattern density in a layered permuton")
    p.add_argument("--pattern", required=True, help="layer sizes, e.g. 1,2")
    p.add_argument("--lengths", required=True, help="comma-separated layer lengths summing to 1")
    p.add_argument("--gradient", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("optimize", help="maximize a pattern density over K-layer permutons")
    p.add_argument("--pattern", required=True, help="layer sizes")
    p.add_argument("--K", type=int)
    p.add_argument("--sweep", type=_sweep_range, help="K range A:B")
    p.add_argument("--geometric", action="store_true", help="search geometric profiles only")
    p.add_argument("--orientation", choices=("increasing", "decreasing"), default="increasing")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--progress", action="store_true", help="per-K progress on stderr")
    _add_opt_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("exact", help="best layered permutation of order n")
    p.add_argument("--pattern", required=True, help="layer sizes")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--pruned", action="store_true", help="branch-and-bound composition search")
    p.add_argument("--all-permutations", action="store_true", help="search all n! permutations")
    p.add_argument("--guard", type=int, help="override the enumeration guard")
    _add_common(p)
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("sample", help="sample permutations from a layered permuton")
    p.add_argument("--lengths", required=True)
    p.add_argument("--m", type=int, default=5, help="order of sampled permutations")
    p.add_argument("--size", type=int, default=10)
    p.add_argument("--pattern", help="estimate this pattern's density instead")
    p.add_argument("--trials", type=int, default=100000)
    _add_common(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("embed", help="layered permuton of a layered permutation")
    p.add_argument("--perm", required=True)
    p.add_argument("--segments", action="store_true", help="emit support segments as CSV")
    _add_common(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("bounds", help="extended-precision bounds")
    bsub = p.add_subparsers(dest="bounds_kind", required=True)
    q = bsub.add_parser("analysis", help="bounds for the pattern (n, 1, tail)")
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--tail", default="2")
    q.add_argument("--d-prime", help="lower bound on the tail's packing density (default 2*sqrt(3)-3)")
    _add_common(q)
    q = bsub.add_parser("chain", help="closing estimates for (n,1,2)")
    q.add_argument("--n-min", type=int, default=13)
    q.add_argument("--n-max", type=int, default=100)
    q.add_argument("--d-prime")
    _add_common(q)
    q = bsub.add_parser("n0", help="smallest n with a contradiction")
    q.add_argument("--tail", default="2")
    q.add_argument("--d-prime")
    q.add_argument("--horizon", type=int, default=500)
    _add_common(q)
    q = bsub.add_parser("merge", help="merge-lemma constants")
    q.add_argument("--pattern", required=True)
    q.add_argument("--C", help="big-layer fraction (default 1/(2 m^3 k^(2m+1)))")
    _add_common(q)
    q = bsub.add_parser("thresholds", help="forced layer-length thresholds")
    q.add_argument("--pattern", required=True)
    q.add_argument("--epsilon", type=float, required=True)
    _add_common(q)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("verify-paper", help="run the acceptance checks")
    p.add_argument("--only", action="append", help=f"comma-separated subset of: {', '.join(CHECKS)}")
    p.add_argument("--horizon", type=int, default=100, help="last n of the closing-estimate chain")
    p.add_argument("--trials", type=int, help="random instances for property checks")
    _add_opt_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_verify)
    return parser


def _subparser_path(parser: argparse.ArgumentParser, argv: list[str]):
    """Innermost subparser selected by ``argv`` and the index just past its name."""
    current, depth = parser, 0
    for i, tok in enumerate(argv):
        actions = [a for a in current._actions if isinstance(a, argparse._SubParsersAction)]
        if not actions:
            break
        if tok in actions[0].choices:
            current, depth = actions[0].choices[tok], i + 1
    return current, depth


def read_config(path: str) -> dict[str, str]:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key.replace("_", "-")] = value
    return values


def _apply_config(parser, argv: list[str]) -> list[str]:
    """Prefix flags from --config so command-line flags override them."""
    path = None
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif tok.startswith("--config="):
            path = tok.split("=", 1)[1]
    if path is None:
        return argv
    sub, depth = _subparser_path(parser, argv)
    flags = {}
    for action in sub._actions:
        for opt in action.option_strings:
            if opt.startswith("--"):
                flags[opt[2:]] = action
    extra = []
    for key, value in read_config(path).items():
        action = flags.get(key)
        if action is None or key == "config":
            raise ValidationError(f"config key {key!r} is not a flag of this command")
        if action.nargs == 0:
            if value.lower() in ("1", "true", "yes", "on"):
                extra.append(f"--{key}")
        else:
            extra.extend([f"--{key}", value])
    # Config flags go right after the subcommand so later command-line flags win.
    return argv[:depth] + extra + argv[depth:]


def _resolved_config(args) -> dict:
    skip = {"func", "output", "config", "verbose"}
    cfg = {}
    for key, value in sorted(vars(args).items()):
        if key in skip:
            continue
        cfg[key] = list(value) if isinstance(value, tuple) else value
    return cfg


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config(parser, argv)
        args = parser.parse_args(argv)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    t0 = time.perf_counter()
    try:
        result, code = args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ResourceGuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GUARD
    if isinstance(result, str):
        _emit(result, args.output)
        return code
    report = {
        "schema_version": SCHEMA_VERSION,
        "tool": "layerpack",
        "version": __version__,
        "command": args.command if args.command != "bounds" else f"bounds {args.bounds_kind}",
        "config": _resolved_config(args),
        "result": result,
    }
    if args.timing:
        report["wall_clock_seconds"] = round(time.perf_counter() - t0, 3)
    _emit(json.dumps(report, indent=2, sort_keys=False) + "\n", args.output)
    return code


if __name__ == "__main__":
    sys.exit(main())
