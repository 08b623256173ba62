"""Command-line front end.

Every command prints (or writes with ``--out``) a JSON report::

    {"schema": "effpac.report/1", "command": ..., "config": {...}, "result": {...}}

Rationals are read and written as exact ``p/q`` strings. Options may also
come from ``--config file.json``; flags given on the command line win.
"""
from __future__ import annotations

import argparse
import ast
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from fractions import Fraction
from pathlib import Path

from .cantor import format_rational, parse_point, parse_rational
from .concepts import Gaussian, UniformBox, computable_replacement, rationalize_hyperplane
from .construction import (
    PiThreePredicate,
    emitted_witnesses,
    run_construction,
    treatment_witnesses,
    verify_disjoint_witnesses,
    vc_growth_profile,
)
from .errors import (
    ApproximationError,
    DomainError,
    EffpacError,
    NoConsistentHypothesis,
    PrecisionError,
    SchemaError,
    UndecidedMembership,
)
from .pac import (
    PACParams,
    distribution_from_json,
    is_nontrivial,
    j_membership,
    pac_experiment,
    q_membership,
    transversal_check,
)
from .pi01 import ConceptClassEnum, node_status
from .vc import WitnessPool, shatter_count, vc_report

REPORT_SCHEMA = "effpac.report/1"
CACHE_ENV = "EFFPAC_CACHE_DIR"

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_UNDECIDED = 3
EXIT_NO_HYPOTHESIS = 4
EXIT_APPROXIMATION = 5
EXIT_SCHEMA = 6
EXIT_PRECISION = 7
EXIT_DOMAIN = 8

STOCHASTIC = {"pac", "rationalize"}

DEFAULTS = {
    "prefix": None,
    "budget": 32,
    "format": "json",
    "workers": 1,
    "trials": 200,
    "mc_samples": 10_000,
    "samples": 100_000,
    "measure": "uniform",
    "n": 0,
    "horizon": 8,
    "settle": 2,
    "precision": 32,
    "d": None,
}


class UsageError(Exception):
    pass


def _rational(text):
    try:
        return parse_rational(text)
    except SchemaError as exc:
        raise argparse.ArgumentTypeError(str(exc))


_REAL_NAMES = {"pi": math.pi, "e": math.e, "sqrt": math.sqrt}


def parse_real(text: str):
    """Exact rational when the text is one, otherwise a float (names pi, e, sqrt allowed)."""
    text = str(text).strip()
    try:
        return parse_rational(text)
    except SchemaError:
        pass
    tree = ast.parse(text, mode="eval")
    for node in ast.walk(tree):
        ok = isinstance(node, (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Constant, ast.Call,
                               ast.Load, ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub))
        if isinstance(node, ast.Name):
            ok = node.id in _REAL_NAMES
        if not ok:
            raise SchemaError(f"cannot read a real number from {text!r}")
    return float(eval(compile(tree, "<real>", "eval"), {"__builtins__": {}}, dict(_REAL_NAMES)))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with option values")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--format", choices=["json", "csv"])
    common.add_argument("--timing", action="store_true", help="include wall-clock duration")
    common.add_argument("--class", dest="class_file", help="concept catalog JSON")
    common.add_argument("--pool", help="witness pool JSON")
    common.add_argument("--dist", help="distribution JSON")
    common.add_argument("--prefix", type=int, help="number of class members considered")
    common.add_argument("--budget", type=int, help="bits used to decide memberships")
    common.add_argument("--eps", type=_rational)
    common.add_argument("--delta", type=_rational)
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int)

    parser = argparse.ArgumentParser(prog="effpac", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", parents=[common], help="tree decisions for (sigma, stage) pairs")
    p.add_argument("--node", action="append", help="sigma:stage, repeatable")
    p.add_argument("--index", type=int, action="append", help="class members to query")

    p = sub.add_parser("shatter", parents=[common], help="shatter count of pool points")
    p.add_argument("--points", help="comma-separated pool indices (default: all)")

    p = sub.add_parser("vc", parents=[common], help="search for a shattered d-set")
    p.add_argument("--d", type=int)

    p = sub.add_parser("pac", parents=[common], help="repeated PAC trials")
    p.add_argument("--target", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--d", type=int, help="certified VC lower bound used for sample sizing")
    p.add_argument("--mc-samples", dest="mc_samples", type=int)

    p = sub.add_parser("transversal", parents=[common], help="eps-transversal, Q and J predicates")
    p.add_argument("--points", help="';'-separated point descriptions (the set N or tuple x)")
    p.add_argument("--ys", help="';'-separated points; when given, also evaluate J")

    p = sub.add_parser("rationalize", parents=[common], help="rational approximation of a hyperplane")
    p.add_argument("--a", help="comma-separated coefficients (reals like pi/4 allowed)")
    p.add_argument("--b", help="offset: the half-space is a.x <= b")
    p.add_argument("--measure", choices=["uniform", "gaussian"])
    p.add_argument("--samples", type=int)

    p = sub.add_parser("construct", parents=[common], help="simulate the completeness construction")
    p.add_argument("--R", dest="relation", help="builtin:true|false|even|y-le-x|threshold(c) or expr:...")
    p.add_argument("--n", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--settle", type=int)
    p.add_argument("--catalog-out", dest="catalog_out", help="write the emitted class here")
    p.add_argument("--pool-out", dest="pool_out", help="write first-treatment witnesses here")
    p.add_argument("--profile", action="store_true", help="include the VC growth profile")

    p = sub.add_parser("replace", parents=[common], help="computable replacement of a point")
    p.add_argument("--point")
    p.add_argument("--index", type=int, action="append", help="class members (default: whole prefix)")
    p.add_argument("--precision", type=int)
    return parser


def parse_config(argv) -> argparse.Namespace:
    """Parse flags, fold in ``--config`` values, apply defaults, validate."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}")
        for key, value in data.items():
            key = key.replace("-", "_")
            if key == "class":
                key = "class_file"
            if key == "R":
                key = "relation"
            if getattr(args, key, None) is None:
                if key in ("eps", "delta"):
                    value = parse_rational(value)
                setattr(args, key, value)
    for key, value in DEFAULTS.items():
        if key in vars(args) and getattr(args, key) is None:
            setattr(args, key, value)
    if args.command in STOCHASTIC and args.seed is None:
        raise UsageError(f"'{args.command}' is stochastic and requires --seed")
    return args


def _need(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise UsageError(f"'{args.command}' needs " + ", ".join("--" + n.replace("_file", "") for n in missing))


def _load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path} is not valid JSON: {exc}")


def _load_class(args) -> ConceptClassEnum:
    _need(args, "class_file")
    return ConceptClassEnum.from_catalog(_load_json(args.class_file))


def _prefix(args, C) -> int:
    return args.prefix if args.prefix is not None else len(C)


def _points(text: str):
    return [parse_point(s) for s in text.split(";") if s.strip()]


def cmd_encode(args):
    C = _load_class(args)
    _need(args, "node")
    nodes = []
    for item in args.node:
        sigma, _, s = item.partition(":")
        nodes.append((sigma, int(s) if s else len(sigma)))
    indices = args.index if args.index else range(_prefix(args, C))
    rows = []
    for k in indices:
        tree = C.enumerate(k)
        for sigma, s in nodes:
            rows.append({"concept": k, "sigma": sigma, "stage": s, "status": node_status(tree, sigma, s)})
    return {"decisions": rows}, rows


def cmd_shatter(args):
    C = _load_class(args)
    _need(args, "pool")
    pool = WitnessPool.from_json(_load_json(args.pool))
    idx = [int(i) for i in args.points.split(",")] if args.points else list(range(len(pool)))
    rep = shatter_count(C, _prefix(args, C), [pool.points[i] for i in idx], args.budget)
    out = rep.to_json()
    out["subset"] = idx
    out["traces"] = sorted(sorted(idx[i] for i in t) for t in out["traces"])
    return out, [{"subset": " ".join(map(str, idx)), "count": rep.count, "shattered": rep.shattered}]


def cmd_vc(args):
    C = _load_class(args)
    _need(args, "pool", "d")
    pool = WitnessPool.from_json(_load_json(args.pool))
    out = vc_report(C, _prefix(args, C), pool, args.d, args.budget)
    rows = [{"size": k, "max_count": v} for k, v in out["shatter_counts"].items()]
    return out, rows


def cmd_pac(args):
    C = _load_class(args)
    _need(args, "dist", "target", "eps", "delta", "d")
    D = distribution_from_json(_load_json(args.dist))
    prefix = _prefix(args, C)
    report = pac_experiment(
        C, prefix, args.target, D, PACParams(args.eps, args.delta), args.trials, args.seed, args.d,
        budget=args.budget, workers=args.workers, mc_samples=args.mc_samples,
    )
    out = report.to_json()
    if hasattr(D, "atoms"):
        out["nontrivial"] = is_nontrivial(C, prefix, D, args.budget)
    return out, [t for t in out["trials"]]


def cmd_transversal(args):
    C = _load_class(args)
    _need(args, "dist", "eps", "points")
    D = distribution_from_json(_load_json(args.dist))
    if not hasattr(D, "atoms"):
        raise UsageError("transversal predicates need a finite-support distribution")
    R = C.oracles(_prefix(args, C))
    xs = _points(args.points)
    masses = [format_rational(D.mass(o, args.budget)) for o in R]
    out = {
        "transversal": transversal_check(xs, R, D, args.eps, args.budget),
        "in_Q": q_membership(xs, R, D, args.eps, args.budget),
        "masses": masses,
        "heavy": [i for i, o in enumerate(R) if D.mass(o, args.budget) > args.eps],
    }
    if args.ys:
        out["in_J"] = j_membership(xs, _points(args.ys), R, D, args.eps, args.budget)
    return out, [{"transversal": out["transversal"], "in_Q": out["in_Q"], "in_J": out.get("in_J")}]


def cmd_rationalize(args):
    _need(args, "a", "b", "eps")
    a = [parse_real(c) for c in args.a.split(",")]
    b = parse_real(args.b)
    d = len(a)
    mu = UniformBox(d) if args.measure == "uniform" else Gaussian([0.0] * d, [[float(i == j) for j in range(d)] for i in range(d)])
    res = rationalize_hyperplane(a, b, mu, args.eps, samples=args.samples, seed=args.seed)
    out = res.to_json()
    out["measure"] = mu.describe()
    return out, [out]


def _cache_path(key: dict) -> Path | None:
    root = os.environ.get(CACHE_ENV)
    if not root:
        return None
    digest = hashlib.sha256(json.dumps(key, sort_keys=True).encode()).hexdigest()[:24]
    return Path(root) / f"construct-{digest}.json"


def cmd_construct(args):
    _need(args, "relation")
    P = PiThreePredicate(args.relation, args.n)
    key = {"R": P.spec, "n": P.n, "horizon": args.horizon, "settle": args.settle,
           "profile": bool(args.profile), "budget": args.budget}
    cache = _cache_path(key)
    if cache is not None and cache.exists():
        out = json.loads(cache.read_text())
    else:
        report = run_construction(P, args.horizon, args.settle)
        out = report.to_json()
        out["catalog"] = report.concept_class.to_catalog()
        out["disjoint_witnesses"] = verify_disjoint_witnesses(report)
        out["witness_count"] = len(emitted_witnesses(report))
        firsts = {}
        for b in report.blocks:
            firsts.setdefault(b.t, b)
        out["pool"] = WitnessPool(
            [p for t in sorted(firsts) for p in treatment_witnesses(t, firsts[t].k)], args.budget
        ).to_json() if firsts else {"schema": "effpac.pool/1", "precision": args.budget, "points": []}
        if args.profile:
            out["profile"] = {str(t): v for t, v in vc_growth_profile(report, args.budget).items()}
        if cache is not None:
            cache.parent.mkdir(parents=True, exist_ok=True)
            cache.write_text(json.dumps(out, sort_keys=True))
    if args.catalog_out:
        Path(args.catalog_out).write_text(json.dumps(out["catalog"], indent=2, sort_keys=True) + "\n")
    if args.pool_out:
        Path(args.pool_out).write_text(json.dumps(out["pool"], indent=2, sort_keys=True) + "\n")
    return out, out["blocks"]


def cmd_replace(args):
    C = _load_class(args)
    _need(args, "point")
    y = parse_point(args.point)
    indices = args.index if args.index else list(range(_prefix(args, C)))
    rep = computable_replacement(y, [C.oracle(k) for k in indices], args.precision)
    out = {
        "input": y.describe(),
        "replacement": rep.point.describe(),
        "branch": rep.branch,
        "precision_used": rep.precision_used,
        "memberships": dict(zip(map(str, indices), rep.statuses)),
    }
    return out, [out]


COMMANDS = {
    "encode": cmd_encode,
    "shatter": cmd_shatter,
    "vc": cmd_vc,
    "pac": cmd_pac,
    "transversal": cmd_transversal,
    "rationalize": cmd_rationalize,
    "construct": cmd_construct,
    "replace": cmd_replace,
}


def _echo(args) -> dict:
    out = {}
    for key, value in sorted(vars(args).items()):
        # worker count and output plumbing do not affect results
        if key in ("out", "timing", "config", "command", "workers") or value is None:
            continue
        if isinstance(value, Fraction):
            value = format_rational(value)
        out[key] = value
    return out


def _csv(rows) -> str:
    buf = io.StringIO()
    if rows:
        fields = sorted({k for r in rows for k in r})
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: json.dumps(v) if isinstance(v, (dict, list)) else v for k, v in r.items()})
    return buf.getvalue()


def dispatch(args) -> dict:
    """Run the selected command and return the full report."""
    start = time.perf_counter()
    result, rows = COMMANDS[args.command](args)
    report = {"schema": REPORT_SCHEMA, "command": args.command, "config": _echo(args), "result": result}
    if args.timing:
        report["duration_s"] = time.perf_counter() - start
    report["_rows"] = rows
    return report


def render(report: dict, fmt: str) -> str:
    rows = report.pop("_rows", [])
    if fmt == "csv":
        return _csv(rows)
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def main(argv=None) -> int:
    try:
        args = parse_config(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (UsageError, SchemaError) as exc:
        print(f"effpac: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    codes = [
        (UndecidedMembership, EXIT_UNDECIDED),
        (NoConsistentHypothesis, EXIT_NO_HYPOTHESIS),
        (ApproximationError, EXIT_APPROXIMATION),
        (SchemaError, EXIT_SCHEMA),
        (PrecisionError, EXIT_PRECISION),
        (EffpacError, EXIT_DOMAIN),
    ]
    try:
        text = render(dispatch(args), args.format)
    except UsageError as exc:
        print(f"effpac: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EffpacError as exc:
        print(f"effpac: {type(exc).__name__}: {exc}", file=sys.stderr)
        return next(code for cls, code in codes if isinstance(exc, cls))
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
