"""Shatter counts and VC-dimension search over finite witness pools.

Everything here is relative to a finite prefix of the class enumeration and
a finite pool of points, so results are certified lower bounds ("this set is
shattered") plus pool-relative upper bounds ("no set from this pool is").
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

from .cantor import PointGen, parse_point
from .errors import DomainError, SchemaError, UndecidedMembership
from .pi01 import IN, OUT, ConceptClassEnum, decide_point

POOL_SCHEMA = "effpac.pool/1"


@dataclass
class WitnessPool:
    points: list
    precision: int

    def __post_init__(self):
        if self.precision < 1:
            raise DomainError("pool precision must be at least 1")
        seen = {}
        for i, p in enumerate(self.points):
            key = p.prefix(self.precision)
            if key in seen:
                raise DomainError(
                    f"pool points {seen[key]} and {i} agree on their first {self.precision} bits"
                )
            seen[key] = i

    def __len__(self):
        return len(self.points)

    def to_json(self) -> dict:
        return {
            "schema": POOL_SCHEMA,
            "precision": self.precision,
            "points": [p.describe() for p in self.points],
        }

    @classmethod
    def from_json(cls, data) -> "WitnessPool":
        if not isinstance(data, dict) or "points" not in data:
            raise SchemaError("pool file needs a 'points' list")
        return cls([parse_point(s) for s in data["points"]], int(data.get("precision", 32)))


def membership_masks(
    C: ConceptClassEnum, prefix_len: int, points: Sequence[PointGen], budget: int
) -> list[int]:
    """Bit j of entry k is set iff point j belongs to concept C(k)."""
    if prefix_len < 1:
        raise DomainError("prefix_len must be at least 1")
    masks = []
    for k in range(prefix_len):
        o = C.oracle(k)
        mask = 0
        for j, p in enumerate(points):
            verdict = decide_point(o, p, budget)
            if verdict == IN:
                mask |= 1 << j
            elif verdict != OUT:
                raise UndecidedMembership(p.describe(), k, budget)
        masks.append(mask)
    return masks


class TraceTable:
    """Membership masks of one class prefix over one pool, computed once."""

    def __init__(self, C: ConceptClassEnum, prefix_len: int, points: Sequence[PointGen], budget: int):
        self.points = list(points)
        self.prefix_len = prefix_len
        self.budget = budget
        self.masks = membership_masks(C, prefix_len, self.points, budget)
        self._distinct = sorted(set(self.masks))

    def traces(self, subset: Sequence[int], stop_at: int | None = None) -> set[int]:
        """Distinct traces on ``subset`` (pool indices), encoded as subset-relative bitmasks."""
        out = set()
        for m in self._distinct:
            code = 0
            for pos, j in enumerate(subset):
                if m >> j & 1:
                    code |= 1 << pos
            out.add(code)
            if stop_at is not None and len(out) >= stop_at:
                break
        return out

    def shattered(self, subset: Sequence[int]) -> bool:
        full = 1 << len(subset)
        return len(self.traces(subset, stop_at=full)) == full


@dataclass
class ShatterReport:
    subset: list
    realized_traces: set
    count: int
    prefix_len: int
    budget: int
    points: list = field(default_factory=list)

    @property
    def shattered(self) -> bool:
        return self.count == 2 ** len(self.subset)

    def to_json(self) -> dict:
        n = len(self.subset)
        return {
            "subset": list(self.subset),
            "points": list(self.points),
            "count": self.count,
            "shattered": self.shattered,
            "traces": sorted(
                [[self.subset[i] for i in range(n) if code >> i & 1] for code in self.realized_traces]
            ),
            "prefix_len": self.prefix_len,
            "budget": self.budget,
        }


def shatter_count(
    C: ConceptClassEnum, prefix_len: int, S: Sequence[PointGen], budget: int
) -> ShatterReport:
    """``Pi_C(S)`` over concepts C(0) ... C(prefix_len - 1)."""
    table = TraceTable(C, prefix_len, S, budget)
    idx = list(range(len(S)))
    traces = table.traces(idx)
    return ShatterReport(idx, traces, len(traces), prefix_len, budget, [p.describe() for p in S])


def is_shattered(C: ConceptClassEnum, prefix_len: int, S: Sequence[PointGen], budget: int) -> bool:
    return shatter_count(C, prefix_len, S, budget).shattered


@dataclass
class LowerBound:
    found: bool
    witness: list | None
    d: int

    def __bool__(self):
        return self.found


def _search(table: TraceTable, n_points: int, d: int) -> list | None:
    for subset in combinations(range(n_points), d):
        if table.shattered(subset):
            return list(subset)
    return None


def vc_lower_bound(
    C: ConceptClassEnum, prefix_len: int, pool: WitnessPool, d: int, budget: int, table: TraceTable | None = None
) -> LowerBound:
    """Lexicographically first d-subset of the pool shattered by the prefix, if any."""
    if d < 0 or d > len(pool):
        raise DomainError(f"d={d} must lie in [0, {len(pool)}]")
    table = table or TraceTable(C, prefix_len, pool.points, budget)
    witness = _search(table, len(pool), d)
    return LowerBound(witness is not None, witness, d)


def infinite_vc_horizon_check(
    C: ConceptClassEnum, n: int, pool: WitnessPool, prefix_len: int, budget: int
) -> bool:
    """Level-n instance of the infinite-VC predicate, restricted to pool and prefix.

    True iff some n points of the pool have, for every S within {1..n}, a
    concept index k < prefix_len whose trace on them is exactly S.
    """
    if n < 1:
        raise DomainError("n must be at least 1")
    if n > len(pool):
        return False
    return vc_lower_bound(C, prefix_len, pool, n, budget).found


def max_shatter_counts(table: TraceTable, n_points: int, up_to: int) -> dict[int, int]:
    return {
        k: max((len(table.traces(s)) for s in combinations(range(n_points), k)), default=0)
        for k in range(up_to + 1)
    }


def vc_report(C: ConceptClassEnum, prefix_len: int, pool: WitnessPool, d: int, budget: int) -> dict:
    """Search for a shattered d-set and summarize the pool-relative picture."""
    table = TraceTable(C, prefix_len, pool.points, budget)
    result = vc_lower_bound(C, prefix_len, pool, d, budget, table)
    pool_vc = 0
    for k in range(1, len(pool) + 1):
        if _search(table, len(pool), k) is None:
            break
        pool_vc = k
    return {
        "found": result.found,
        "d": d,
        "witness": result.witness,
        "witness_points": [pool.points[i].describe() for i in result.witness or []],
        "shatter_counts": {str(k): v for k, v in max_shatter_counts(table, len(pool), d).items()},
        "pool_vc_dimension": pool_vc,
        "prefix_len": prefix_len,
        "budget": budget,
    }
