"""Finite-horizon simulation of the infinite-VC completeness construction.

Given a decidable relation ``R(x, y, n)``, the limit function
``f(x) = [forall y R(x, y, n)]`` is approximated by ``f_s(x) = [forall y < s
R(x, y, n)]``. At stage ``s`` every ``t <= s`` with ``f_s(t) = 1`` receives a
fresh treatment index ``k`` and a block of ``2^t`` concepts is appended to
the class: concept ``i`` of the block holds the witnesses
``pi(t, k, j - 1)`` for ``j`` in ``P_t^{-1}(i + 1)``, so the block realizes
every trace on the ``t`` witnesses of the treatment. If ``f`` later drops at
stage ``z``, every node of length ``>= z`` is cut from those trees and the
block collapses to empty concepts.
"""
from __future__ import annotations

import ast
import re
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable

from .cantor import EventuallyPeriodic, stream_key
from .errors import DomainError, HorizonError, SchemaError
from .pi01 import ConceptClassEnum, FinitePathTree, Segment, register_segment
from .vc import TraceTable

DEFAULT_SETTLE = 2

# --------------------------------------------------------------------------
# predicates


_ALLOWED = (
    ast.Expression, ast.BoolOp, ast.And, ast.Or, ast.UnaryOp, ast.Not, ast.USub,
    ast.BinOp, ast.Add, ast.Sub, ast.Mult, ast.FloorDiv, ast.Mod, ast.Pow,
    ast.Compare, ast.Eq, ast.NotEq, ast.Lt, ast.LtE, ast.Gt, ast.GtE,
    ast.Name, ast.Load, ast.Constant, ast.IfExp,
)


def _compile_expr(text: str):
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise SchemaError(f"bad relation expression {text!r}") from exc
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED):
            raise SchemaError(f"disallowed syntax {type(node).__name__} in {text!r}")
        if isinstance(node, ast.Name) and node.id not in ("x", "y", "n"):
            raise SchemaError(f"unknown name {node.id!r} in {text!r}")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, bool)):
            raise SchemaError(f"only integer constants allowed in {text!r}")
    return compile(tree, "<relation>", "eval")


_BUILTINS: dict[str, Callable[[int, int, int], bool]] = {
    "true": lambda x, y, n: True,
    "false": lambda x, y, n: False,
    "even": lambda x, y, n: x % 2 == 0,
    "y-le-x": lambda x, y, n: y <= x,
}


@dataclass(frozen=True)
class PiThreePredicate:
    """A decidable relation R(x, y, n) with the parameter n fixed.

    ``spec`` is one of ``true``, ``false``, ``even``, ``y-le-x``,
    ``threshold(c)`` (R holds iff x < c), or ``expr:<expression in x, y, n>``;
    a leading ``builtin:`` is ignored.
    """

    spec: str
    n: int = 0

    def __post_init__(self):
        spec = self.spec.strip()
        if spec.startswith("builtin:"):
            spec = spec[len("builtin:"):]
        object.__setattr__(self, "spec", spec)
        _resolve(spec)

    def R(self, x: int, y: int) -> bool:
        return bool(_resolve(self.spec)(x, y, self.n))


@lru_cache(maxsize=None)
def _resolve(spec: str) -> Callable[[int, int, int], bool]:
    if spec in _BUILTINS:
        return _BUILTINS[spec]
    m = re.fullmatch(r"threshold\((\d+)\)", spec)
    if m:
        c = int(m.group(1))
        return lambda x, y, n: x < c
    if spec.startswith("expr:"):
        code = _compile_expr(spec[5:])
        return lambda x, y, n: eval(code, {"__builtins__": {}}, {"x": x, "y": y, "n": n})
    raise SchemaError(f"unknown relation {spec!r}")


def limit_approx(P: PiThreePredicate, x: int, s: int) -> int:
    """f_s(x): 1 iff R(x, y, n) for every y < s. Nonincreasing in s."""
    return int(all(P.R(x, y) for y in range(s)))


# --------------------------------------------------------------------------
# subsets, witnesses


@dataclass(frozen=True)
class SubsetBijection:
    """P_t(S) = 1 + sum of 2^(i-1) over i in S, for S within {1..t}."""

    t: int

    def __call__(self, S) -> int:
        S = frozenset(S)
        if any(not 1 <= i <= self.t for i in S):
            raise DomainError(f"{sorted(S)} is not a subset of {{1..{self.t}}}")
        return 1 + sum(1 << (i - 1) for i in S)

    def inverse(self, j: int) -> frozenset:
        if not 1 <= j <= 1 << self.t:
            raise DomainError(f"{j} is outside 1..{1 << self.t}")
        j -= 1
        return frozenset(i + 1 for i in range(self.t) if j >> i & 1)


def subset_bijection(t: int) -> SubsetBijection:
    if t < 0:
        raise DomainError("t must be a natural number")
    return SubsetBijection(t)


def _gamma(n: int) -> str:
    """Elias gamma code of n >= 1 (self-delimiting)."""
    b = bin(n)[2:]
    return "0" * (len(b) - 1) + b


@lru_cache(maxsize=None)
def witness(a: int, b: int, j: int) -> EventuallyPeriodic:
    """pi(a, b, j): b zeros, a marker 1, an injective code of (a, b, j), then zeros.

    Any two witnesses with second indices b, b' agree below min(b, b'), and
    the position of the first 1 recovers b, so distinct triples give distinct
    points.
    """
    if min(a, b, j) < 0:
        raise DomainError("witness indices must be natural numbers")
    code = "1" + _gamma(a + 1) + _gamma(b + 1) + _gamma(j + 1)
    return EventuallyPeriodic("0" * b + code, "0").canonical()


def treatment_witnesses(t: int, k: int) -> list[EventuallyPeriodic]:
    """The t points a treatment (t, k) tries to shatter, indexed by elements 1..t."""
    return [witness(t, k, j - 1) for j in range(1, t + 1)]


class BlockMaker:
    """Builds concept i of the block for treatment (t, k)."""

    def __init__(self, t: int, k: int, cut: int | None):
        self.t, self.k, self.cut = t, k, cut
        self.points = treatment_witnesses(t, k)
        self.bij = SubsetBijection(t)

    def __call__(self, i: int) -> FinitePathTree:
        members = self.bij.inverse(i + 1)
        return FinitePathTree([self.points[j - 1] for j in sorted(members)], self.cut)


@dataclass(frozen=True)
class Block:
    t: int
    k: int
    stage: int
    start: int
    cut: int | None

    @property
    def size(self) -> int:
        return 1 << self.t

    @property
    def flagged(self) -> bool:
        """No drop of f(t) was seen up to the horizon; the real cut may lie beyond it."""
        return self.cut is None

    def descriptor(self) -> dict:
        return {"kind": "witness-block", "t": self.t, "k": self.k, "stage": self.stage, "cut": self.cut}

    def segment(self) -> Segment:
        return Segment(self.size, BlockMaker(self.t, self.k, self.cut), self.descriptor())

    def trees(self):
        make = BlockMaker(self.t, self.k, self.cut)
        return [make(i) for i in range(self.size)]


@register_segment("witness-block")
def _block_segment(desc: dict) -> Segment:
    try:
        cut = desc.get("cut")
        block = Block(int(desc["t"]), int(desc["k"]), int(desc.get("stage", 0)), 0, None if cut is None else int(cut))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad witness-block entry {desc!r}") from exc
    return block.segment()


# --------------------------------------------------------------------------
# the construction


@dataclass
class ConstructionState:
    horizon: int
    stage: int = 0
    used: dict = field(default_factory=dict)  # t -> set of treatment indices (G_t)
    counter: int = 0  # first undefined slot of the class
    blocks: list = field(default_factory=list)
    log: list = field(default_factory=list)


def _first_drop(P: PiThreePredicate, t: int, s: int, horizon: int) -> int | None:
    for z in range(s + 1, horizon + 1):
        if limit_approx(P, t, z) == 0:
            return z
    return None


def construction_step(state: ConstructionState, P: PiThreePredicate, s: int) -> ConstructionState:
    """Run stage s and return the successor state (the input is left untouched)."""
    if s != state.stage + 1:
        raise DomainError(f"stage {s} does not follow stage {state.stage}")
    if s > state.horizon:
        raise HorizonError(f"stage {s} exceeds horizon {state.horizon}")
    used = {t: set(ks) for t, ks in state.used.items()}
    blocks = list(state.blocks)
    log = list(state.log)
    counter = state.counter
    for t in range(1, s + 1):
        if limit_approx(P, t, s) == 0:
            continue
        taken = used.setdefault(t, set())
        k = next(i for i in range(len(taken) + 1) if i not in taken)
        block = Block(t, k, s, counter, _first_drop(P, t, s, state.horizon))
        blocks.append(block)
        log.append({"stage": s, "t": t, "k": k, "start": counter, "size": block.size, "cut": block.cut})
        counter += block.size
        taken.add(k)
    return replace(state, stage=s, used=used, counter=counter, blocks=blocks, log=log)


@dataclass
class ConstructionReport:
    predicate: PiThreePredicate
    horizon: int
    state: ConstructionState
    concept_class: ConceptClassEnum
    settle: int = DEFAULT_SETTLE

    @property
    def blocks(self) -> list:
        return self.state.blocks

    def status(self, t: int) -> str:
        """stable / pending / dropped / never, as seen at the horizon.

        ``pending`` marks t whose blocks are unbounded at the horizon but are
        too close to it (within ``settle`` stages) to count as stabilized.
        """
        if not any(b.t == t for b in self.blocks):
            return "never"
        if limit_approx(self.predicate, t, self.horizon) == 0:
            return "dropped"
        return "stable" if t <= self.horizon - self.settle else "pending"

    def statuses(self) -> dict[int, str]:
        return {t: self.status(t) for t in range(1, self.horizon + 1)}

    def to_json(self) -> dict:
        return {
            "relation": self.predicate.spec,
            "n": self.predicate.n,
            "horizon": self.horizon,
            "settle": self.settle,
            "slots": self.state.counter,
            "blocks": self.state.log,
            "status": {str(t): s for t, s in self.statuses().items()},
        }


def run_construction(P: PiThreePredicate, horizon: int, settle: int = DEFAULT_SETTLE) -> ConstructionReport:
    """Stages 1..horizon; the resulting class pads unused slots with empty trees."""
    if horizon < 0:
        raise DomainError("horizon must be a natural number")
    state = ConstructionState(horizon)
    for s in range(1, horizon + 1):
        state = construction_step(state, P, s)
    C = ConceptClassEnum([b.segment() for b in state.blocks], name=f"construction:{P.spec}:n={P.n}:H={horizon}")
    return ConstructionReport(P, horizon, state, C, settle)


def verify_disjoint_witnesses(report_or_blocks) -> bool:
    """No path occurs in the concepts of two different treatments.

    Accepts a report or a list of ``(treatment, trees)`` pairs, which lets
    tests hand-build adversarial inputs.
    """
    if isinstance(report_or_blocks, ConstructionReport):
        groups = [((b.t, b.k), b.trees()) for b in report_or_blocks.blocks]
    else:
        groups = report_or_blocks
    owner: dict[str, tuple] = {}
    for treatment, trees in groups:
        for tree in trees:
            for p in tree.paths:
                key = stream_key(p)
                if owner.setdefault(key, treatment) != treatment:
                    return False
    return True


def prefix_agreement_holds(points: dict) -> bool:
    """pi(s,t,j) and pi(s,t',j') agree below min(t, t'), for all given witnesses.

    ``points`` maps (s, t, j) to the witness point.
    """
    items = sorted(points.items())
    for (_, t, _), p in items:
        for (_, t2, _), q in items:
            m = min(t, t2)
            if p.prefix(m) != q.prefix(m):
                return False
    return True


def emitted_witnesses(report: ConstructionReport) -> dict:
    return {(b.t, b.k, j - 1): p for b in report.blocks for j, p in enumerate(treatment_witnesses(b.t, b.k), 1)}


def vc_growth_profile(report: ConstructionReport, budget: int = 64, pools: dict | None = None) -> dict[int, dict]:
    """For each t that received attention, is its first treatment shattered by its block?"""
    pools = pools or {}
    out = {}
    for t, status in report.statuses().items():
        blocks = [b for b in report.blocks if b.t == t]
        if not blocks:
            continue
        b = min(blocks, key=lambda blk: blk.k)
        points = pools.get(t) or treatment_witnesses(t, b.k)
        block_class = ConceptClassEnum([b.segment()])
        table = TraceTable(block_class, b.size, points, budget)
        out[t] = {
            "status": status,
            "k": b.k,
            "treatments": len(blocks),
            "flagged": b.flagged,
            "shattered": table.shattered(list(range(len(points)))),
        }
    return out
