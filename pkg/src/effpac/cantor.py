"""Finite descriptions of points of Cantor space, dyadic balls, and encodings.

Points of ``2^omega`` are infinite bit streams. Only finitely described
points are supported:

* ``ep:<pre>|<period>``          eventually periodic stream, e.g. ``ep:1|0``
* ``rat<d>:<q1>,...,<qd>``       rational point of ``[0,1)^d``, interleaved
* ``rat<d>@<lo>,<hi>:<q1>,...``  rational point of the box ``[lo,hi)^d``
* ``asg:<var>=<bit>,...|<bit>``  truth assignment with a default bit

Bit positions are 0-based. Finite binary words are plain ``str`` objects
over ``"01"``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

from .errors import DomainError, SchemaError

BitWord = str


def parse_rational(text) -> Fraction:
    """Parse ``"p/q"``, an integer, or a decimal string into an exact Fraction."""
    if isinstance(text, Fraction):
        return text
    if isinstance(text, int):
        return Fraction(text)
    if isinstance(text, float):
        raise SchemaError(f"refusing to parse float {text!r}; pass a 'p/q' string")
    try:
        return Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise SchemaError(f"malformed rational {text!r}") from exc


def format_rational(q: Fraction) -> str:
    q = Fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def check_word(sigma: str) -> str:
    if any(ch not in "01" for ch in sigma):
        raise DomainError(f"not a binary word: {sigma!r}")
    return sigma


def is_prefix(tau: str, sigma: str) -> bool:
    return sigma.startswith(tau)


def neg_lg_ceil(r: Fraction) -> int:
    """Return ceil(-log2(r)) exactly, for 0 < r <= 1."""
    r = Fraction(r)
    if r <= 0 or r > 1:
        raise DomainError(f"radius must lie in (0, 1], got {r}")
    n = 0
    while Fraction(1, 2**n) > r:
        n += 1
    return n


@dataclass(frozen=True)
class Box:
    """The half-open cube ``[lo, hi)^d`` that real coordinates are rescaled from."""

    lo: Fraction = Fraction(0)
    hi: Fraction = Fraction(1)

    def __post_init__(self):
        object.__setattr__(self, "lo", Fraction(self.lo))
        object.__setattr__(self, "hi", Fraction(self.hi))
        if not self.lo < self.hi:
            raise DomainError(f"empty box [{self.lo}, {self.hi})")

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    def to_unit(self, x: Fraction) -> Fraction:
        x = Fraction(x)
        if not self.lo <= x < self.hi:
            raise DomainError(f"coordinate {x} outside box [{self.lo}, {self.hi})")
        return (x - self.lo) / self.width

    def is_unit(self) -> bool:
        return self.lo == 0 and self.hi == 1


UNIT = Box()


def binary_digits(u: Fraction, n: int) -> str:
    """First ``n`` bits of the terminating-preferred expansion of ``u`` in [0,1)."""
    num, den = u.numerator, u.denominator
    out = []
    for _ in range(n):
        num *= 2
        bit, num = divmod(num, den)
        out.append("1" if bit else "0")
    return "".join(out)


def periodic_expansion(u: Fraction) -> tuple[str, str]:
    """Binary expansion of ``u`` in [0,1) as (preperiod, period) by long division."""
    num, den = u.numerator, u.denominator
    seen: dict[int, int] = {}
    bits = []
    while num not in seen:
        seen[num] = len(bits)
        num *= 2
        bit, num = divmod(num, den)
        bits.append("1" if bit else "0")
    start = seen[num]
    return "".join(bits[:start]), "".join(bits[start:])


class PointGen:
    """A finitely described point of Cantor space."""

    finite = True

    def bit_at(self, i: int) -> int:
        return int(self.prefix(i + 1)[i])

    def prefix(self, n: int) -> str:
        raise NotImplementedError

    def describe(self) -> str:
        raise NotImplementedError

    def to_periodic(self) -> "EventuallyPeriodic":
        raise NotImplementedError

    def __str__(self):
        return self.describe()


@dataclass(frozen=True)
class EventuallyPeriodic(PointGen):
    pre: str = ""
    period: str = "0"

    def __post_init__(self):
        check_word(self.pre)
        check_word(self.period)
        if not self.period:
            raise DomainError("period of an eventually periodic point must be nonempty")

    def prefix(self, n: int) -> str:
        return _cached_prefix(self, n)

    def _compute_prefix(self, n: int) -> str:
        if n <= len(self.pre):
            return self.pre[:n]
        rest = n - len(self.pre)
        reps = -(-rest // len(self.period))
        return self.pre + (self.period * reps)[:rest]

    def bit_at(self, i: int) -> int:
        if i < len(self.pre):
            return int(self.pre[i])
        return int(self.period[(i - len(self.pre)) % len(self.period)])

    def describe(self) -> str:
        return f"ep:{self.pre}|{self.period}"

    def to_periodic(self) -> "EventuallyPeriodic":
        return self

    def canonical(self) -> "EventuallyPeriodic":
        """Shortest period, then shortest preperiod; equal streams map to equal forms."""
        per = self.period
        n = len(per)
        for k in range(1, n + 1):
            if n % k == 0 and per[:k] * (n // k) == per:
                per = per[:k]
                break
        pre = self.pre
        while pre and pre[-1] == per[-1]:
            per = per[-1] + per[:-1]
            pre = pre[:-1]
        return EventuallyPeriodic(pre, per)


@dataclass(frozen=True)
class RationalPoint(PointGen):
    """A point of ``[lo,hi)^d`` with rational coordinates, interleaved bitwise."""

    coords: tuple = ()
    box: Box = UNIT

    def __post_init__(self):
        coords = tuple(Fraction(c) for c in self.coords)
        if not coords:
            raise DomainError("a rational point needs at least one coordinate")
        for c in coords:
            self.box.to_unit(c)
        object.__setattr__(self, "coords", coords)

    @property
    def dim(self) -> int:
        return len(self.coords)

    def prefix(self, n: int) -> str:
        return _cached_prefix(self, n)

    def _compute_prefix(self, n: int) -> str:
        d = self.dim
        per = -(-n // d)
        streams = [binary_digits(self.box.to_unit(c), per) for c in self.coords]
        return "".join(streams[k % d][k // d] for k in range(n))

    def describe(self) -> str:
        body = ",".join(format_rational(c) for c in self.coords)
        if self.box.is_unit():
            return f"rat{self.dim}:{body}"
        return f"rat{self.dim}@{format_rational(self.box.lo)},{format_rational(self.box.hi)}:{body}"

    def to_periodic(self) -> EventuallyPeriodic:
        parts = [periodic_expansion(self.box.to_unit(c)) for c in self.coords]
        d = self.dim
        pre_len = d * max(len(p) for p, _ in parts)
        per_len = d * math.lcm(*(len(q) for _, q in parts))
        bits = self.prefix(pre_len + per_len)
        return EventuallyPeriodic(bits[:pre_len], bits[pre_len:]).canonical()


@dataclass(frozen=True)
class Assignment(PointGen):
    """A truth assignment: bit ``v`` is the value of variable ``x_v``."""

    values: tuple = ()
    default: int = 0

    def __post_init__(self):
        vals = dict(self.values)
        for var, bit in vals.items():
            if var < 0 or bit not in (0, 1):
                raise DomainError(f"bad assignment entry {var}={bit}")
        if self.default not in (0, 1):
            raise DomainError("default bit must be 0 or 1")
        object.__setattr__(self, "values", tuple(sorted(vals.items())))

    def prefix(self, n: int) -> str:
        return _cached_prefix(self, n)

    def _compute_prefix(self, n: int) -> str:
        vals = dict(self.values)
        return "".join(str(vals.get(i, self.default)) for i in range(n))

    def describe(self) -> str:
        body = ",".join(f"{v}={b}" for v, b in self.values)
        return f"asg:{body}|{self.default}"

    def to_periodic(self) -> EventuallyPeriodic:
        top = max((v for v, _ in self.values), default=-1) + 1
        return EventuallyPeriodic(self.prefix(top), str(self.default)).canonical()


@dataclass(frozen=True, eq=False)
class BitSource(PointGen):
    """An externally supplied bit stream with no finite description.

    Used only as input to witness replacement; it cannot be serialized.
    """

    fn: Callable[[int], int] = field(default=lambda i: 0)
    name: str = "external"
    finite = False

    def prefix(self, n: int) -> str:
        return "".join("1" if self.fn(i) else "0" for i in range(n))

    def bit_at(self, i: int) -> int:
        return 1 if self.fn(i) else 0

    def describe(self) -> str:
        return f"ext:{self.name}"

    def to_periodic(self):
        raise DomainError(f"external bit source {self.name!r} has no finite description")


@lru_cache(maxsize=65536)
def _cached_prefix(p: PointGen, n: int) -> str:
    return p._compute_prefix(n)


def same_stream(p: PointGen, q: PointGen) -> bool:
    """Exact equality of two finitely described bit streams."""
    return canonical_form(p) == canonical_form(q)


@lru_cache(maxsize=1 << 18)
def canonical_form(p: PointGen) -> EventuallyPeriodic:
    return p.to_periodic().canonical()


def stream_key(p: PointGen) -> str:
    """A hashable key identifying the stream (equal streams, equal keys)."""
    return canonical_form(p).describe()


def parse_point(text: str) -> PointGen:
    text = text.strip()
    try:
        kind, _, body = text.partition(":")
        if kind == "ep":
            pre, bar, per = body.partition("|")
            if not bar:
                raise ValueError("missing '|'")
            return EventuallyPeriodic(pre, per)
        if kind.startswith("rat"):
            head, at, bounds = kind.partition("@")
            d = int(head[3:])
            box = UNIT
            if at:
                lo, hi = bounds.split(",")
                box = Box(parse_rational(lo), parse_rational(hi))
            coords = tuple(parse_rational(c) for c in body.split(","))
            if len(coords) != d:
                raise ValueError(f"expected {d} coordinates, got {len(coords)}")
            return RationalPoint(coords, box)
        if kind == "asg":
            entries, bar, default = body.partition("|")
            if not bar:
                raise ValueError("missing '|'")
            values = []
            for item in filter(None, entries.split(",")):
                var, bit = item.split("=")
                values.append((int(var), int(bit)))
            return Assignment(tuple(values), int(default))
    except (ValueError, DomainError) as exc:
        raise SchemaError(f"malformed point {text!r}: {exc}") from exc
    raise SchemaError(f"unknown point kind in {text!r}")


def interleave_encode(coords: Sequence, box: Box = UNIT) -> RationalPoint:
    """Encode a point of ``[lo,hi)^d``: bit k is bit k//d of coordinate k mod d."""
    if len(coords) < 1:
        raise DomainError("need at least one coordinate")
    return RationalPoint(tuple(Fraction(c) for c in coords), box)


def extract_coordinate(p: PointGen, i: int, d: int, nbits: int) -> str:
    """First ``nbits`` bits of coordinate ``i`` of a d-dimensional interleaved stream."""
    bits = p.prefix(d * nbits)
    return bits[i::d]


def cell_of(sigma: str, d: int = 1, box: Box = UNIT) -> list[tuple[Fraction, Fraction]]:
    """Closed axis-aligned cell (per-coordinate [lo, hi]) of all points extending sigma."""
    out = []
    for i in range(d):
        bits = sigma[i::d]
        scale = box.width / (1 << len(bits))
        lo = box.lo + scale * (int(bits, 2) if bits else 0)
        out.append((lo, lo + scale))
    return out


@dataclass(frozen=True)
class DyadicBall:
    """``B_r(center)``: paths extending center or first differing at index >= cutoff."""

    center: str
    radius: Fraction

    def __post_init__(self):
        check_word(self.center)
        object.__setattr__(self, "radius", Fraction(self.radius))
        neg_lg_ceil(self.radius)

    @property
    def cutoff(self) -> int:
        return neg_lg_ceil(self.radius)

    @property
    def cylinder(self) -> str:
        """The ball is exactly the set of paths extending this word."""
        return self.center[: self.cutoff]


def ball_contains(b: DyadicBall, p: PointGen) -> bool:
    cyl = b.cylinder
    return p.prefix(len(cyl)) == cyl
