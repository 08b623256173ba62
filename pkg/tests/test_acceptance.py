"""Acceptance gate: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` (lines are printed even when
output is captured) or directly as ``python3 tests/test_acceptance.py``.
"""
from __future__ import annotations

import itertools
import json
import math
import random
import sys
import time
from fractions import Fraction as F
from pathlib import Path

import numpy as np
import pytest

from effpac import cli
from effpac.cantor import BitSource, RationalPoint
from effpac.concepts import (
    FormulaTree,
    HalfspaceTree,
    IntervalTree,
    RationalHalfspace,
    RationalInterval,
    UniformBox,
    computable_replacement,
    rationalize_hyperplane,
)
from effpac.construction import (
    PiThreePredicate,
    emitted_witnesses,
    prefix_agreement_holds,
    run_construction,
    verify_disjoint_witnesses,
    vc_growth_profile,
)
from effpac.pac import FiniteSupport, PACParams, pac_experiment
from effpac.pi01 import INCLUDED, UNRESOLVED, ConceptClassEnum, decide_point, node_status, point_in_class
from effpac.vc import WitnessPool, shatter_count, vc_lower_bound

_printer = None


def verdict(n: int, ok: bool, detail: str, elapsed: float, limit: float | None = None):
    if limit is not None and elapsed >= limit:
        ok, detail = False, f"{detail}; took {elapsed:.1f}s, limit {limit:.0f}s"
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n:>2}: {detail} ({elapsed:.1f}s)"
    if _printer is not None:
        with _printer.disabled():
            print("\n" + line)
    else:
        print(line)
    assert ok, line


@pytest.fixture(autouse=True)
def _show(capsys):
    global _printer
    _printer = capsys
    yield
    _printer = None


# brute-force reference helpers


def brute_shattered(masks: list[int], subset) -> bool:
    """masks[c] has bit i set when concept c contains point i."""
    want = 1 << len(subset)
    seen = set()
    for m in masks:
        seen.add(tuple((m >> i) & 1 for i in subset))
        if len(seen) == want:
            return True
    return False


def brute_max_shattered(masks, n_points, up_to):
    best = 0
    for d in range(1, up_to + 1):
        if any(brute_shattered(masks, S) for S in itertools.combinations(range(n_points), d)):
            best = d
        else:
            break
    return best


# 1. half-planes


def grid_points():
    return [(F(2 * i + 1, 10), F(2 * j + 1, 10)) for i in range(5) for j in range(5)]


def halfplane_catalog(points):
    dirs = [(a, b) for a in range(-2, 3) for b in range(-2, 3) if (a, b) != (0, 0) and math.gcd(a, b) == 1]
    hs = []
    for a in dirs:
        proj = sorted({a[0] * x + a[1] * y for x, y in points})
        for lo, hi in zip(proj, proj[1:]):
            hs.append((a, (lo + hi) / 2))
    return hs


def test_criterion_1_halfplanes():
    t0 = time.perf_counter()
    pts = grid_points()
    hs = halfplane_catalog(pts)
    C = ConceptClassEnum([HalfspaceTree(RationalHalfspace((F(a[0]), F(a[1])), b)) for a, b in hs])
    pool = WitnessPool([RationalPoint(p) for p in pts], 24)
    three = vc_lower_bound(C, len(C), pool, 3, 24)
    four = vc_lower_bound(C, len(C), pool, 4, 24)
    masks = [sum(1 << i for i, (x, y) in enumerate(pts) if a[0] * x + a[1] * y <= b) for a, b in hs]
    oracle_three = brute_shattered(masks, three.witness) if three.found else False
    oracle_none4 = not any(brute_shattered(masks, S) for S in itertools.combinations(range(25), 4))
    ok = len(hs) >= 64 and three.found and oracle_three and not four.found and oracle_none4
    verdict(1, ok, f"{len(hs)} half-planes on 5x5 grid: 3-set {three.witness}, no 4-set={not four.found}",
            time.perf_counter() - t0, 60)


# 2. intervals


def test_criterion_2_intervals():
    t0 = time.perf_counter()
    ends = [(F(a, 8), F(b, 8)) for a in range(9) for b in range(a, 9)]
    C = ConceptClassEnum([IntervalTree(RationalInterval(a, b)) for a, b in ends])
    xs = [F(2 * i + 1, 16) for i in range(8)]
    pool = WitnessPool([RationalPoint((x,)) for x in xs], 16)
    two, three = vc_lower_bound(C, len(C), pool, 2, 16), vc_lower_bound(C, len(C), pool, 3, 16)
    masks = [sum(1 << i for i, x in enumerate(xs) if a <= x <= b) for a, b in ends]
    ok = two.found and not three.found and brute_max_shattered(masks, 8, 4) == 2
    verdict(2, ok, f"2-set {two.witness}, no 3-set={not three.found}, brute force VC=2",
            time.perf_counter() - t0, 10)


# 3. shatter counts vs bit vectors


def random_instance(rng: random.Random):
    if rng.random() < 0.5:
        den = rng.choice([4, 8, 16])
        ends = [sorted((F(rng.randint(0, den), den), F(rng.randint(0, den), den))) for _ in range(rng.randint(1, 64))]
        xs = rng.sample([F(2 * i + 1, 2 * den) for i in range(den)], min(den, rng.randint(1, 12)))
        C = ConceptClassEnum([IntervalTree(RationalInterval(a, b)) for a, b in ends])
        masks = [sum(1 << i for i, x in enumerate(xs) if a <= x <= b) for a, b in ends]
        return C, [RationalPoint((x,)) for x in xs], masks
    xs = rng.sample([(F(2 * i + 1, 16), F(2 * j + 1, 16)) for i in range(8) for j in range(8)], rng.randint(1, 12))
    hs = []
    for _ in range(rng.randint(1, 64)):
        a = (F(rng.randint(-3, 3)), F(rng.randint(1, 3)))
        hs.append((a, F(rng.randint(-8, 32), 8)))
    # a.x is a multiple of 1/16 and b an odd multiple of 1/64, so no point is on a boundary
    hs = [(a, b + F(1, 64)) for a, b in hs]
    C = ConceptClassEnum([HalfspaceTree(RationalHalfspace(a, b)) for a, b in hs])
    masks = [sum(1 << i for i, (x, y) in enumerate(xs) if a[0] * x + a[1] * y <= b) for a, b in hs]
    return C, [RationalPoint(p) for p in xs], masks


def test_criterion_3_shatter_oracle():
    t0 = time.perf_counter()
    rng = random.Random(2024)
    mismatches = []
    for case in range(100):
        C, pts, masks = random_instance(rng)
        subset = sorted(rng.sample(range(len(pts)), rng.randint(0, len(pts))))
        prefix = rng.randint(1, len(C))
        got = shatter_count(C, prefix, [pts[i] for i in subset], 32).count
        want = len({tuple((m >> i) & 1 for i in subset) for m in masks[:prefix]})
        if got != want:
            mismatches.append((case, got, want))
    verdict(3, not mismatches, f"100 random instances, mismatches={mismatches[:3]}", time.perf_counter() - t0, 120)


# 4. formula trees


def random_formula(rng: random.Random, depth: int) -> str:
    if depth == 0 or rng.random() < 0.25:
        return rng.choice(["x0", "x1", "x2", "x3", "x0", "x1", "x2", "x3", "0", "1"])
    op = rng.choice(["~", "&", "|"])
    if op == "~":
        return "~" + random_formula(rng, depth - 1)
    return f"({random_formula(rng, depth - 1)} {op} {random_formula(rng, depth - 1)})"


def python_truth(text: str, bits) -> bool:
    expr = text.replace("~", " not ").replace("&", " and ").replace("|", " or ")
    env = {f"x{i}": bool(b) for i, b in enumerate(bits)}
    return bool(eval(expr, {"__builtins__": {}}, env))


def test_criterion_4_formulas():
    t0 = time.perf_counter()
    rng = random.Random(7)
    corpus = {random_formula(rng, 4) for _ in range(900)}
    corpus = sorted(corpus)[:600]
    bad = []
    for text in corpus:
        tree = FormulaTree(text, nvars=4)
        for bits in itertools.product((0, 1), repeat=4):
            sigma = "".join(map(str, bits))
            if (node_status(tree, sigma, 4) == INCLUDED) != python_truth(text, bits):
                bad.append((text, sigma))
    verdict(4, len(corpus) >= 500 and not bad, f"{len(corpus)} formulas, disagreements={bad[:2]}",
            time.perf_counter() - t0, 60)


# 5. PAC experiment


def test_criterion_5_pac():
    t0 = time.perf_counter()
    ends = [(F(a, 8), F(b, 8)) for a in range(9) for b in range(a, 9)]
    C = ConceptClassEnum([IntervalTree(RationalInterval(a, b)) for a, b in ends])
    D = FiniteSupport([RationalPoint((F(2 * i + 1, 32),)) for i in range(16)])
    target = ends.index((F(1, 4), F(5, 8)))
    eps = delta = F(1, 5)
    rep = pac_experiment(C, len(C), target, D, PACParams(eps, delta), 200, seed=42, d=2)
    band = 1 - float(delta) - 3 * math.sqrt(float(delta) * (1 - float(delta)) / 200)
    ok = rep.completed == 200 and rep.aborted == 0 and rep.success_rate >= band
    verdict(5, ok, f"success rate {rep.success_rate:.3f} >= {band:.3f} over 200 trials, m={rep.m_used}",
            time.perf_counter() - t0, 120)


# 6. rationalize


def test_criterion_6_rationalize():
    t0 = time.perf_counter()
    eps = F(1, 100)
    one = rationalize_hyperplane([1.0], math.pi / 4, UniformBox(1), eps, seed=0)
    # under uniform[0,1] the symmetric difference of x <= b and x <= pi/4 has mass |b - pi/4|
    a1 = float(one.halfspace.a[0])
    exact_1d = abs(float(one.halfspace.b) / a1 - math.pi / 4) if a1 > 0 else 1.0
    a, b = [math.sqrt(2) / 2, math.pi / 5], math.e / 4
    two = rationalize_hyperplane(a, b, UniformBox(2), eps, seed=1)
    x = np.random.default_rng(99).uniform(size=(100_000, 2))
    abar = np.array([float(c) for c in two.halfspace.a])
    differ = (x @ np.array(a) <= b) != (x @ abar <= float(two.halfspace.b))
    est = float(differ.mean())
    sigma = math.sqrt(est * (1 - est) / len(x))
    ok = exact_1d < 0.01 and est < float(eps) + 3 * sigma
    verdict(6, ok, f"1-d |b-pi/4|={exact_1d:.5f}; 2-d independent MC mass={est:.5f} (sigma {sigma:.5f})",
            time.perf_counter() - t0, 60)


# 7. construction dichotomy


def test_criterion_7_dichotomy():
    t0 = time.perf_counter()
    notes, ok = [], True
    for H in (4, 8, 16):
        rep = run_construction(PiThreePredicate("builtin:even"), H)
        prof = vc_growth_profile(rep)
        stable = [t for t, v in prof.items() if v["status"] == "stable"]
        ok &= bool(stable) and all(prof[t]["shattered"] for t in stable)
        rep = run_construction(PiThreePredicate("builtin:y-le-x"), H)
        prof = vc_growth_profile(rep)
        shattered = [t for t, v in prof.items() if v["shattered"]]
        # every block whose cut fell inside the horizon holds no infinite path
        empty = all(
            point_in_class(tree, p, 64).excluded_at is not None
            for blk in rep.blocks if blk.cut is not None
            for tree in blk.trees() for p in tree.paths
        )
        ok &= empty and all(t > H - rep.settle for t in shattered) and len(shattered) <= rep.settle
        notes.append(f"H={H}: even stable {stable}; y-le-x shattered only {shattered}")
    verdict(7, ok, "; ".join(notes), time.perf_counter() - t0, 60)


# 8. witness hygiene


def test_criterion_8_witnesses():
    t0 = time.perf_counter()
    ok, sizes = True, []
    for spec in ("builtin:true", "builtin:false", "builtin:even", "builtin:y-le-x", "threshold(3)"):
        rep = run_construction(PiThreePredicate(spec), 8)
        w = emitted_witnesses(rep)
        ok &= verify_disjoint_witnesses(rep) and prefix_agreement_holds(w)
        ok &= len({p.describe() for p in w.values()}) == len(w)
        sizes.append(len(w))
    verdict(8, ok, f"disjoint and prefix-agreeing over {sum(sizes)} witnesses in 5 runs", time.perf_counter() - t0, 10)


# 9. computable replacement


def test_criterion_9_replacement():
    t0 = time.perf_counter()
    rng = random.Random(31)
    failures, case, skipped = [], 0, 0
    while case < 50:
        k = rng.randint(0, 4)
        ivs = [sorted((F(rng.randint(0, 16), 16), F(rng.randint(0, 16), 16))) for _ in range(k)]
        oracles = [IntervalTree(RationalInterval(a, b)) for a, b in ivs]
        oracles = [ConceptClassEnum(oracles).oracle(i) for i in range(k)]
        if case % 2:
            bits = [rng.randint(0, 1) for _ in range(200)]
            y = BitSource(lambda i, bits=bits: bits[i] if i < len(bits) else (i * 7919) % 3 % 2, f"ext{case}")
        else:
            y = RationalPoint((F(rng.randint(1, 10**6 - 1), 10**6),))
        if any(decide_point(o, y, 48) == UNRESOLVED for o in oracles):
            skipped += 1  # not an off-boundary target; draw again
            continue
        r = computable_replacement(y, oracles, 48)
        agree = all(decide_point(o, r.point, 64) == decide_point(o, y, 64) for o in oracles)
        if not (r.point.finite and agree):
            failures.append(case)
        case += 1
    verdict(9, not failures, f"50 off-boundary cases ({skipped} boundary draws redrawn), failures={failures}",
            time.perf_counter() - t0, 30)


# 10. determinism


def test_criterion_10_determinism(tmp_path):
    t0 = time.perf_counter()
    ends = [(F(a, 8), F(b, 8)) for a in range(9) for b in range(a, 9)]
    C = ConceptClassEnum([IntervalTree(RationalInterval(a, b)) for a, b in ends])
    atoms = [RationalPoint((F(2 * i + 1, 32),)) for i in range(16)]

    (tmp_path / "c.json").write_text(json.dumps(C.to_catalog()))
    (tmp_path / "d.json").write_text(json.dumps(FiniteSupport(atoms).to_json()))
    (tmp_path / "p.json").write_text(json.dumps(WitnessPool(atoms, 16).to_json()))
    c, d, p = (str(tmp_path / n) for n in ("c.json", "d.json", "p.json"))
    runs = {
        "pac": ["pac", "--class", c, "--dist", d, "--target", "20", "--eps", "1/5", "--delta", "1/5",
                "--d", "2", "--trials", "40", "--seed", "42"],
        "rationalize": ["rationalize", "--a", "sqrt(2)/2,pi/5", "--b", "e/4", "--eps", "1/50", "--seed", "5",
                        "--samples", "20000"],
        "construct": ["construct", "--R", "builtin:even", "--horizon", "6", "--profile"],
        "vc": ["vc", "--class", c, "--pool", p, "--d", "2"],
        "shatter": ["shatter", "--class", c, "--pool", p, "--points", "0,3,7"],
        "encode": ["encode", "--class", c, "--node", "0110:3"],
        "replace": ["replace", "--class", c, "--point", "rat1:3/7"],
        "transversal": ["transversal", "--class", c, "--dist", d, "--eps", "1/5", "--points", "rat1:1/32;rat1:31/32"],
    }
    bad = []
    for name, argv in runs.items():
        outs = []
        variants = [argv, argv] + ([argv + ["--workers", "4"]] if name == "pac" else [])
        for i, v in enumerate(variants):
            out = tmp_path / f"{name}-{i}.json"
            if cli.main(v + ["--out", str(out)]) != 0:
                bad.append(f"{name} exit")
            outs.append(out.read_bytes() if out.exists() else b"")
        if len(set(outs)) != 1:
            bad.append(name)
    verdict(10, not bad, f"{len(runs)} commands byte-identical across reruns and 1 vs 4 workers; differing={bad}",
            time.perf_counter() - t0)


if __name__ == "__main__":
    import tempfile

    failed = 0
    for name, fn in sorted(globals().items(), key=lambda kv: int(kv[0].split("_")[2]) if kv[0].startswith("test_criterion") else 0):
        if not name.startswith("test_criterion"):
            continue
        try:
            if "tmp_path" in fn.__code__.co_varnames[: fn.__code__.co_argcount]:
                with tempfile.TemporaryDirectory() as d:
                    fn(Path(d))
            else:
                fn()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
