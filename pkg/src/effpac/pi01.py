"""Co-c.e. trees given by stagewise exclusion rules, and membership oracles.

A tree is never materialized. It answers ``excluded(sigma, s)``: has node
``sigma`` been thrown out by stage ``s``? Every rule in the catalog is
monotone in the stage and closed under extension, so the set of nodes still
included at stage ``s`` is a tree and the paths surviving every stage form a
closed subset of Cantor space (a concept).

Most rules are built from a stage-free test ``dead(tau)`` ("no path of the
concept extends tau"); at stage ``s`` a node is judged by its length-``s``
prefix, which is how a Pi^0_1 tree reveals itself over time.
"""
from __future__ import annotations

import bisect
import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from .cantor import (
    PointGen,
    canonical_form,
    check_word,
    neg_lg_ceil,
    parse_point,
    stream_key,
)
from .errors import DomainError, SchemaError

INCLUDED = "included"
EXCLUDED = "excluded"

IN = "in"
OUT = "out"
UNRESOLVED = "boundary-unresolved"

DEFAULT_LOOKAHEAD = 8
CATALOG_SCHEMA = "effpac.catalog/1"


class StageTree:
    """Base class for exclusion-rule trees.

    Subclasses implement ``dead`` (or override ``excluded`` directly) and
    may provide exact cylinder tests used by the membership oracle.
    """

    kind = "abstract"

    def __init__(self):
        self._memo: dict[str, bool] = {}

    def dead(self, tau: str) -> bool:
        raise NotImplementedError

    def _dead(self, tau: str) -> bool:
        hit = self._memo.get(tau)
        if hit is None:
            hit = self._memo[tau] = bool(self.dead(tau))
        return hit

    def excluded(self, sigma: str, s: int) -> bool:
        return self._dead(sigma[:s])

    # Exact tests on the closed set of paths. ``None`` means "not known
    # exactly"; the oracle then falls back to searching the tree.
    def cylinder_meets(self, rho: str) -> bool | None:
        return None

    def cylinder_inside(self, rho: str) -> bool:
        return False

    def contains_point(self, p: PointGen) -> bool | None:
        return None

    def params(self) -> dict:
        return {}

    def descriptor(self) -> dict:
        return {"kind": self.kind, **self.params()}

    def __eq__(self, other):
        return isinstance(other, StageTree) and self.descriptor() == other.descriptor()

    def __hash__(self):
        return hash(json.dumps(self.descriptor(), sort_keys=True))

    def __repr__(self):
        return f"{type(self).__name__}({self.params()})"

    def __getstate__(self):
        state = dict(self.__dict__)
        state["_memo"] = {}
        return state


_TREE_KINDS: dict[str, Callable[[dict], StageTree]] = {}
_SEGMENT_KINDS: dict[str, Callable[[dict], "Segment"]] = {}


def register_tree(kind: str):
    def deco(cls):
        cls.kind = kind
        _TREE_KINDS[kind] = cls.from_params
        return cls

    return deco


def register_segment(kind: str):
    """Register a catalog entry kind that expands into several consecutive slots."""

    def deco(factory):
        _SEGMENT_KINDS[kind] = factory
        return factory

    return deco


def tree_from_descriptor(desc: dict) -> StageTree:
    try:
        kind = desc["kind"]
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"concept descriptor without 'kind': {desc!r}") from exc
    if kind not in _TREE_KINDS:
        raise SchemaError(f"unknown concept kind {kind!r}")
    params = {k: v for k, v in desc.items() if k != "kind"}
    try:
        return _TREE_KINDS[kind](params)
    except SchemaError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad {kind} descriptor {desc!r}: {exc}") from exc


@register_tree("full")
class FullTree(StageTree):
    def dead(self, tau):
        return False

    def cylinder_meets(self, rho):
        return True

    def cylinder_inside(self, rho):
        return True

    def contains_point(self, p):
        return True

    @classmethod
    def from_params(cls, params):
        return cls()


@register_tree("empty")
class EmptyTree(StageTree):
    def dead(self, tau):
        return True

    def cylinder_meets(self, rho):
        return False

    def contains_point(self, p):
        return False

    @classmethod
    def from_params(cls, params):
        return cls()


@register_tree("finite-paths")
class FinitePathTree(StageTree):
    """Initial segments of finitely many eventually periodic paths.

    With ``cut = z`` the tree additionally loses every node of length >= z
    once stage z is reached, so it ends up with no infinite paths at all.
    """

    def __init__(self, paths: Iterable[PointGen] = (), cut: int | None = None):
        super().__init__()
        canon = {stream_key(p): canonical_form(p) for p in paths}
        self.paths = tuple(canon[k] for k in sorted(canon))
        self._keys = frozenset(canon)
        self.cut = cut

    def excluded(self, sigma, s):
        if self.cut is not None and s >= self.cut and len(sigma) >= self.cut:
            return True
        return self._dead(sigma[:s])

    def dead(self, tau):
        return not any(p.prefix(len(tau)) == tau for p in self.paths)

    def cylinder_meets(self, rho):
        if self.cut is not None:
            return False
        return not self.dead(rho)

    def contains_point(self, p):
        if not p.finite:
            return None
        return self.cut is None and stream_key(p) in self._keys

    def params(self):
        return {"paths": [p.describe() for p in self.paths], "cut": self.cut}

    @classmethod
    def from_params(cls, params):
        cut = params.get("cut")
        return cls([parse_point(s) for s in params.get("paths", [])], None if cut is None else int(cut))


def node_status(tree: StageTree, sigma: str, s: int) -> str:
    check_word(sigma)
    if s < 0:
        raise DomainError("stage must be a natural number")
    return EXCLUDED if tree.excluded(sigma, s) else INCLUDED


@dataclass(frozen=True)
class PathVerdict:
    """Outcome of watching a point against a tree for ``budget`` stages."""

    budget: int
    excluded_at: int | None = None

    @property
    def excluded(self) -> bool:
        return self.excluded_at is not None

    def __str__(self):
        if self.excluded_at is None:
            return f"not-excluded-within({self.budget})"
        return f"excluded-at({self.excluded_at})"


def point_in_class(tree: StageTree, p: PointGen, budget: int) -> PathVerdict:
    """Least stage s <= budget at which the length-s prefix of p is excluded."""
    if budget < 1:
        raise DomainError("budget must be at least 1")
    bits = p.prefix(budget)
    if not tree.excluded(bits, budget):
        return PathVerdict(budget)
    # exclusion of p[:s] at stage s is monotone in s, so bisect
    lo, hi = 0, budget
    while lo < hi:
        mid = (lo + hi) // 2
        if tree.excluded(bits[:mid], mid):
            hi = mid
        else:
            lo = mid + 1
    return PathVerdict(budget, lo)


class MembershipOracle:
    """Two-sided ball test ``f_c(sigma, r)`` for the paths of a tree.

    Returns 1 if ``B_r(sigma)`` meets the concept and 0 if ``B_{2r}(sigma)``
    misses it. Where the tree gives no exact cylinder test, the answer is 1
    iff some node of length ``cutoff + lookahead`` inside the ball is still
    included at that stage.
    """

    def __init__(self, tree: StageTree, lookahead: int = DEFAULT_LOOKAHEAD):
        self.tree = tree
        self.lookahead = lookahead

    def __call__(self, sigma: str, r) -> int:
        n = neg_lg_ceil(Fraction(r))
        rho = check_word(sigma)[:n]
        exact = self.tree.cylinder_meets(rho)
        if exact is not None:
            return int(exact)
        return int(self._search(rho, n + self.lookahead))

    def _search(self, rho: str, depth: int) -> bool:
        stack = [rho]
        while stack:
            tau = stack.pop()
            if self.tree.excluded(tau, depth):
                continue
            if len(tau) >= depth:
                return True
            stack.append(tau + "1")
            stack.append(tau + "0")
        return False

    def point_status(self, p: PointGen, precision: int) -> str:
        exact = self.tree.contains_point(p) if p.finite else None
        if exact is not None:
            return IN if exact else OUT
        rho = p.prefix(precision)
        if self.tree.cylinder_inside(rho):
            return IN
        if not self(rho, Fraction(1, 2**precision)):
            return OUT
        return UNRESOLVED

    def __repr__(self):
        return f"MembershipOracle({self.tree!r}, lookahead={self.lookahead})"


def effective_membership(o: MembershipOracle, sigma: str, r) -> int:
    r = Fraction(r)
    if not 0 < r <= 1:
        raise DomainError(f"radius must lie in (0, 1], got {r}")
    return o(sigma, r)


def decide_point(o: MembershipOracle, p: PointGen, precision: int) -> str:
    """Classify p as in / out / boundary-unresolved using its first ``precision`` bits.

    ``in`` and ``out`` are certain: the whole cylinder of the prefix lies
    inside (resp. outside) the concept, or the tree decides the point exactly.
    """
    if precision < 1:
        raise DomainError("precision must be at least 1")
    return o.point_status(p, precision)


@dataclass
class Segment:
    """A run of consecutive class slots produced by one catalog entry."""

    size: int
    make: Callable[[int], StageTree]
    descriptor: dict


class _Constant:
    def __init__(self, tree):
        self.tree = tree

    def __call__(self, i):
        return self.tree


class ConceptClassEnum:
    """A growable enumeration ``n -> StageTree``; slots past the end are empty.

    ``effectivity`` is ``"effective"`` when every slot has a membership oracle.
    """

    def __init__(
        self,
        trees: Sequence[StageTree | Segment] = (),
        effectivity: str = "effective",
        lookahead: int = DEFAULT_LOOKAHEAD,
        name: str | None = None,
    ):
        if effectivity not in ("weak", "effective"):
            raise SchemaError(f"effectivity must be 'weak' or 'effective', not {effectivity!r}")
        self.effectivity = effectivity
        self.lookahead = lookahead
        self.name = name
        self._segments: list[Segment] = []
        self._starts: list[int] = []
        self._size = 0
        self._trees: dict[int, StageTree] = {}
        self._oracles: dict[int, MembershipOracle] = {}
        for item in trees:
            self.append(item)

    def append(self, item: StageTree | Segment) -> int:
        """Add a tree (or segment); returns the first slot it occupies."""
        if isinstance(item, StageTree):
            item = Segment(1, _Constant(item), item.descriptor())
        self._starts.append(self._size)
        self._segments.append(item)
        self._size += item.size
        return self._starts[-1]

    def __len__(self):
        return self._size

    def enumerate(self, n: int) -> StageTree:
        if n < 0:
            raise DomainError("class index must be a natural number")
        if n >= self._size:
            return EMPTY_TREE
        tree = self._trees.get(n)
        if tree is None:
            j = bisect.bisect_right(self._starts, n) - 1
            tree = self._trees[n] = self._segments[j].make(n - self._starts[j])
        return tree

    __getitem__ = enumerate

    def oracle(self, n: int) -> MembershipOracle:
        if self.effectivity != "effective":
            raise DomainError("weakly effective classes carry no membership oracles")
        o = self._oracles.get(n)
        if o is None:
            o = self._oracles[n] = MembershipOracle(self.enumerate(n), self.lookahead)
        return o

    def oracles(self, prefix_len: int) -> list[MembershipOracle]:
        return [self.oracle(k) for k in range(prefix_len)]

    def to_catalog(self) -> dict:
        return {
            "schema": CATALOG_SCHEMA,
            "name": self.name,
            "effectivity": self.effectivity,
            "lookahead": self.lookahead,
            "concepts": [seg.descriptor for seg in self._segments],
        }

    @classmethod
    def from_catalog(cls, data: dict) -> "ConceptClassEnum":
        if not isinstance(data, dict) or data.get("schema") != CATALOG_SCHEMA:
            raise SchemaError(f"not a concept catalog (expected schema {CATALOG_SCHEMA!r})")
        entries = data.get("concepts")
        if not isinstance(entries, list):
            raise SchemaError("catalog 'concepts' must be a list")
        items = []
        for desc in entries:
            kind = desc.get("kind") if isinstance(desc, dict) else None
            if kind in _SEGMENT_KINDS:
                items.append(_SEGMENT_KINDS[kind](desc))
            else:
                items.append(tree_from_descriptor(desc))
        return cls(
            items,
            effectivity=data.get("effectivity", "effective"),
            lookahead=int(data.get("lookahead", DEFAULT_LOOKAHEAD)),
            name=data.get("name"),
        )


EMPTY_TREE = EmptyTree()

