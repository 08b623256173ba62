"""Concrete concept families as stage trees.

Propositional formulas live on truth assignments (bit ``i`` is variable
``x_i``). Intervals, half-spaces and convex polygons live on points of a box
``[lo,hi)^d`` interleaved into Cantor space. A node is kept while the closed
axis-aligned cell it decodes to still meets the (closed) region; every test is
done with exact rationals.
"""
from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .cantor import (
    UNIT,
    Box,
    EventuallyPeriodic,
    PointGen,
    cell_of,
    format_rational,
    parse_rational,
)
from .errors import ApproximationError, DomainError, PrecisionError, SchemaError
from .pi01 import (
    IN,
    OUT,
    UNRESOLVED,
    MembershipOracle,
    StageTree,
    decide_point,
    register_tree,
)

# --------------------------------------------------------------------------
# propositional formulas


class Formula:
    def eval(self, bit: Callable[[int], int]) -> bool:
        raise NotImplementedError

    def variables(self) -> frozenset:
        raise NotImplementedError


@dataclass(frozen=True)
class Var(Formula):
    index: int

    def eval(self, bit):
        return bool(bit(self.index))

    def variables(self):
        return frozenset([self.index])

    def __str__(self):
        return f"x{self.index}"


@dataclass(frozen=True)
class Const(Formula):
    value: bool

    def eval(self, bit):
        return self.value

    def variables(self):
        return frozenset()

    def __str__(self):
        return "1" if self.value else "0"


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula

    def eval(self, bit):
        return not self.arg.eval(bit)

    def variables(self):
        return self.arg.variables()

    def __str__(self):
        return f"~{self.arg}"


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula

    def eval(self, bit):
        return self.left.eval(bit) and self.right.eval(bit)

    def variables(self):
        return self.left.variables() | self.right.variables()

    def __str__(self):
        return f"({self.left}&{self.right})"


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula

    def eval(self, bit):
        return self.left.eval(bit) or self.right.eval(bit)

    def variables(self):
        return self.left.variables() | self.right.variables()

    def __str__(self):
        return f"({self.left}|{self.right})"


_TOKEN = re.compile(r"\s*(x\d+|[01()&|~])")


def parse_formula(text: str) -> Formula:
    """Parse ``~``, ``&``, ``|``, parentheses, ``x<i>`` and constants ``0``/``1``."""
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise SchemaError(f"bad formula near {text[pos:]!r}")
        tokens.append(m.group(1))
        pos = m.end()
    tokens.append(None)
    i = 0

    def peek():
        return tokens[i]

    def take():
        nonlocal i
        tok = tokens[i]
        i += 1
        return tok

    def expr():
        node = term()
        while peek() == "|":
            take()
            node = Or(node, term())
        return node

    def term():
        node = factor()
        while peek() == "&":
            take()
            node = And(node, factor())
        return node

    def factor():
        tok = take()
        if tok == "~":
            return Not(factor())
        if tok == "(":
            node = expr()
            if take() != ")":
                raise SchemaError(f"unbalanced parentheses in {text!r}")
            return node
        if tok in ("0", "1"):
            return Const(tok == "1")
        if tok is not None and tok.startswith("x"):
            return Var(int(tok[1:]))
        raise SchemaError(f"unexpected token {tok!r} in {text!r}")

    node = expr()
    if peek() is not None:
        raise SchemaError(f"trailing input in formula {text!r}")
    return node


@register_tree("formula")
class FormulaTree(StageTree):
    """Paths are exactly the assignments satisfying the formula."""

    def __init__(self, formula: Formula | str, nvars: int | None = None):
        super().__init__()
        self.formula = parse_formula(formula) if isinstance(formula, str) else formula
        used = self.formula.variables()
        self.nvars = max(used, default=-1) + 1 if nvars is None else nvars
        if used and max(used) >= self.nvars:
            raise DomainError(f"variable x{max(used)} exceeds declared count {self.nvars}")
        self._vars = sorted(used)

    def _completions(self, tau: str):
        free = [v for v in self._vars if v >= len(tau)]
        for values in itertools.product((0, 1), repeat=len(free)):
            extra = dict(zip(free, values))
            yield lambda v: int(tau[v]) if v < len(tau) else extra[v]

    def dead(self, tau):
        return not any(self.formula.eval(bit) for bit in self._completions(tau))

    def cylinder_meets(self, rho):
        return not self._dead(rho)

    def cylinder_inside(self, rho):
        return all(self.formula.eval(bit) for bit in self._completions(rho))

    def contains_point(self, p):
        if not p.finite:
            return None
        bits = p.prefix(self.nvars)
        return self.formula.eval(lambda v: int(bits[v]))

    def params(self):
        return {"formula": str(self.formula), "nvars": self.nvars}

    @classmethod
    def from_params(cls, params):
        nv = params.get("nvars")
        return cls(params["formula"], None if nv is None else int(nv))


def formula_tree(phi: Formula | str) -> FormulaTree:
    return FormulaTree(phi)


# --------------------------------------------------------------------------
# geometric families


def _box_params(box: Box) -> dict:
    return {"box": [format_rational(box.lo), format_rational(box.hi)]}


def _parse_box(params) -> Box:
    if "box" not in params:
        return UNIT
    lo, hi = params["box"]
    return Box(parse_rational(lo), parse_rational(hi))


@dataclass(frozen=True)
class RationalInterval:
    lo: Fraction
    hi: Fraction
    box: Box = UNIT

    def __post_init__(self):
        object.__setattr__(self, "lo", Fraction(self.lo))
        object.__setattr__(self, "hi", Fraction(self.hi))
        if self.lo > self.hi:
            raise DomainError(f"interval [{self.lo}, {self.hi}] has lo > hi")
        if self.lo < self.box.lo or self.hi > self.box.hi:
            raise DomainError(f"interval [{self.lo}, {self.hi}] leaves the box")

    def contains(self, x) -> bool:
        return self.lo <= x <= self.hi


@register_tree("interval")
class IntervalTree(StageTree):
    def __init__(self, interval: RationalInterval):
        super().__init__()
        self.interval = interval

    def dead(self, tau):
        (lo, hi), = cell_of(tau, 1, self.interval.box)
        return hi < self.interval.lo or lo > self.interval.hi

    def cylinder_meets(self, rho):
        return not self._dead(rho)

    def cylinder_inside(self, rho):
        (lo, hi), = cell_of(rho, 1, self.interval.box)
        return self.interval.lo <= lo and hi <= self.interval.hi

    def params(self):
        return {
            "lo": format_rational(self.interval.lo),
            "hi": format_rational(self.interval.hi),
            **_box_params(self.interval.box),
        }

    @classmethod
    def from_params(cls, params):
        box = _parse_box(params)
        return cls(RationalInterval(parse_rational(params["lo"]), parse_rational(params["hi"]), box))


def interval_tree(interval: RationalInterval) -> IntervalTree:
    return IntervalTree(interval)


@dataclass(frozen=True)
class RationalHalfspace:
    """``{x : a . x <= b}`` (``a . x < b`` when not closed) with rational data."""

    a: tuple
    b: Fraction
    box: Box = UNIT
    closed: bool = True

    def __post_init__(self):
        a = tuple(Fraction(c) for c in self.a)
        if not a or all(c == 0 for c in a):
            raise DomainError("half-space needs a nonzero coefficient vector")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", Fraction(self.b))

    @property
    def dim(self) -> int:
        return len(self.a)

    def value(self, x) -> Fraction:
        return sum(ai * xi for ai, xi in zip(self.a, x))

    def contains(self, x) -> bool:
        v = self.value(x)
        return v <= self.b if self.closed else v < self.b

    def min_over(self, cell) -> Fraction:
        return sum(ai * (lo if ai > 0 else hi) for ai, (lo, hi) in zip(self.a, cell))

    def max_over(self, cell) -> Fraction:
        return sum(ai * (hi if ai > 0 else lo) for ai, (lo, hi) in zip(self.a, cell))

    def to_json(self) -> dict:
        return {
            "d": self.dim,
            "a": [format_rational(c) for c in self.a],
            "b": format_rational(self.b),
            "closed": self.closed,
        }

    @classmethod
    def from_json(cls, params, box: Box = UNIT) -> "RationalHalfspace":
        a = tuple(parse_rational(c) for c in params["a"])
        if "d" in params and int(params["d"]) != len(a):
            raise SchemaError(f"half-space declares d={params['d']} but has {len(a)} coefficients")
        return cls(a, parse_rational(params["b"]), box, bool(params.get("closed", True)))


@register_tree("halfspace")
class HalfspaceTree(StageTree):
    """Closure of the half-space; cells are decoded by de-interleaving."""

    def __init__(self, h: RationalHalfspace):
        super().__init__()
        self.h = h

    def dead(self, tau):
        return self.h.min_over(cell_of(tau, self.h.dim, self.h.box)) > self.h.b

    def cylinder_meets(self, rho):
        return not self._dead(rho)

    def cylinder_inside(self, rho):
        return self.h.max_over(cell_of(rho, self.h.dim, self.h.box)) <= self.h.b

    def params(self):
        return {**self.h.to_json(), **_box_params(self.h.box)}

    @classmethod
    def from_params(cls, params):
        return cls(RationalHalfspace.from_json(params, _parse_box(params)))


def halfspace_tree(h: RationalHalfspace) -> HalfspaceTree:
    return HalfspaceTree(h)


def feasible(constraints: Sequence[tuple[Sequence[Fraction], Fraction]]) -> bool:
    """Exact feasibility of ``{x : a . x <= b for all (a, b)}`` by Fourier-Motzkin."""
    rows = [(tuple(Fraction(c) for c in a), Fraction(b)) for a, b in constraints]
    if not rows:
        return True
    nvar = len(rows[0][0])
    for j in range(nvar):
        pos, neg, rest = [], [], []
        for a, b in rows:
            (pos if a[j] > 0 else neg if a[j] < 0 else rest).append((a, b))
        for ap, bp in pos:
            for an, bn in neg:
                sp, sn = 1 / ap[j], -1 / an[j]
                a = tuple(sp * x + sn * y for x, y in zip(ap, an))
                rest.append((a, sp * bp + sn * bn))
        rows = list(set(rest))
    return all(b >= 0 for _, b in rows)


def _cell_constraints(cell) -> list:
    d = len(cell)
    out = []
    for i, (lo, hi) in enumerate(cell):
        e = [Fraction(0)] * d
        e[i] = Fraction(1)
        out.append((tuple(e), hi))
        out.append((tuple(-c for c in e), -lo))
    return out


@dataclass(frozen=True)
class DGon:
    halfspaces: tuple
    allow_empty: bool = False

    def __post_init__(self):
        hs = tuple(self.halfspaces)
        if len(hs) < 3:
            raise DomainError("a d-gon needs at least 3 half-spaces")
        if len({h.dim for h in hs}) != 1 or len({h.box for h in hs}) != 1:
            raise DomainError("half-spaces of a d-gon must share dimension and box")
        object.__setattr__(self, "halfspaces", hs)
        if not self.allow_empty and self.is_empty():
            raise DomainError("d-gon is empty inside the box; pass allow_empty=True")

    @property
    def dim(self) -> int:
        return self.halfspaces[0].dim

    @property
    def box(self) -> Box:
        return self.halfspaces[0].box

    def is_empty(self) -> bool:
        cell = [(self.box.lo, self.box.hi)] * self.dim
        return not feasible([(h.a, h.b) for h in self.halfspaces] + _cell_constraints(cell))

    def contains(self, x) -> bool:
        return all(h.contains(x) for h in self.halfspaces)


def dgon_from_vertices(vertices: Sequence[Sequence], box: Box = UNIT) -> DGon:
    """Convex polygon from vertices listed counter-clockwise."""
    pts = [tuple(Fraction(c) for c in v) for v in vertices]
    hs = []
    for (x1, y1), (x2, y2) in zip(pts, pts[1:] + pts[:1]):
        # interior lies to the left of each directed edge
        a = (y2 - y1, x1 - x2)
        hs.append(RationalHalfspace(a, a[0] * x1 + a[1] * y1, box))
    return DGon(tuple(hs))


@register_tree("dgon")
class DGonTree(StageTree):
    """A node is excluded as soon as one component half-space excludes it."""

    def __init__(self, g: DGon):
        super().__init__()
        self.g = g
        self.parts = [HalfspaceTree(h) for h in g.halfspaces]

    def excluded(self, sigma, s):
        return any(t.excluded(sigma, s) for t in self.parts)

    def dead(self, tau):
        return any(t.dead(tau) for t in self.parts)

    def cylinder_meets(self, rho):
        cell = cell_of(rho, self.g.dim, self.g.box)
        return feasible([(h.a, h.b) for h in self.g.halfspaces] + _cell_constraints(cell))

    def cylinder_inside(self, rho):
        return all(t.cylinder_inside(rho) for t in self.parts)

    def params(self):
        return {
            "halfspaces": [h.to_json() for h in self.g.halfspaces],
            "allow_empty": self.g.allow_empty,
            **_box_params(self.g.box),
        }

    @classmethod
    def from_params(cls, params):
        box = _parse_box(params)
        hs = tuple(RationalHalfspace.from_json(h, box) for h in params["halfspaces"])
        return cls(DGon(hs, bool(params.get("allow_empty", False))))


def dgon_tree(g: DGon) -> DGonTree:
    return DGonTree(g)


# --------------------------------------------------------------------------
# rational approximation of hyperplanes


class UniformBox:
    """Uniform probability measure on ``[lo, hi]^d``."""

    def __init__(self, d: int = 1, lo: float = 0.0, hi: float = 1.0):
        self.d, self.lo, self.hi = d, lo, hi

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=(n, self.d))

    def describe(self) -> dict:
        return {"kind": "uniform", "d": self.d, "lo": self.lo, "hi": self.hi}


class Gaussian:
    """Normal measure on R^d with the given mean and covariance."""

    def __init__(self, mean, cov):
        self.mean = np.asarray(mean, dtype=float)
        self.cov = np.asarray(cov, dtype=float)
        self.d = len(self.mean)

    def sample(self, rng, n):
        return rng.multivariate_normal(self.mean, self.cov, size=n)

    def describe(self):
        return {"kind": "gaussian", "mean": self.mean.tolist(), "cov": self.cov.tolist()}


def _is_exact(c) -> bool:
    return isinstance(c, (int, Fraction)) and not isinstance(c, bool)


def _dyadic_round(c, k: int) -> Fraction:
    """Nearest multiple of 2^-k to a real given as a number or a ``k -> Fraction`` map."""
    if callable(c):
        return Fraction(round(Fraction(c(k + 2)) * 2**k), 2**k)
    return Fraction(round(Fraction(c) * 2**k), 2**k)


def _as_float(c) -> float:
    return float(c(60)) if callable(c) else float(c)


@dataclass
class RationalizeResult:
    halfspace: RationalHalfspace
    mass: float
    sigma: float
    samples: int
    bits: int | None

    def to_json(self) -> dict:
        return {
            "a": [format_rational(c) for c in self.halfspace.a],
            "b": format_rational(self.halfspace.b),
            "mass_estimate": self.mass,
            "sigma": self.sigma,
            "samples": self.samples,
            "bits": self.bits,
        }


def symmetric_difference_mass(a, b, abar, bbar, mu, samples: int, rng) -> tuple[float, float]:
    """Monte Carlo estimate (and its standard error) of mu(H_f symdiff H_fbar)."""
    x = mu.sample(rng, samples)
    inside = x @ np.asarray(a, dtype=float) <= float(b)
    inside_bar = x @ np.array([float(c) for c in abar]) <= float(bbar)
    est = float(np.mean(inside != inside_bar))
    return est, math.sqrt(est * (1 - est) / samples)


def rationalize_hyperplane(
    a: Sequence,
    b,
    mu,
    eps,
    samples: int = 100_000,
    seed: int = 0,
    max_bits: int = 40,
    box: Box = UNIT,
) -> RationalizeResult:
    """Replace the hyperplane ``a . x = b`` by one with dyadic rational coefficients.

    Coefficients may be exact (int/Fraction), floats, or callables ``k ->
    Fraction`` giving a 2^-k approximation. Rounding precision grows until
    the Monte Carlo symmetric-difference mass plus three standard errors
    drops below ``eps``. The margin never falls below 3/samples, so a run
    that happens to see no disagreement cannot certify an eps the sample
    size cannot resolve.
    """
    eps = float(eps)
    if not 0 < eps <= 1:
        raise DomainError(f"eps must lie in (0, 1], got {eps}")
    coeffs = list(a)
    if all(_is_exact(c) for c in coeffs) and _is_exact(b):
        return RationalizeResult(RationalHalfspace(tuple(coeffs), b, box), 0.0, 0.0, 0, None)
    a_float = [_as_float(c) for c in coeffs]
    b_float = _as_float(b)
    rng = np.random.default_rng(seed)
    est = sigma = float("nan")
    for k in range(1, max_bits + 1):
        abar = [_dyadic_round(c, k) for c in coeffs]
        if all(c == 0 for c in abar):
            continue
        bbar = _dyadic_round(b, k)
        est, sigma = symmetric_difference_mass(a_float, b_float, abar, bbar, mu, samples, rng)
        if est + max(3 * sigma, 3 / samples) < eps:
            return RationalizeResult(RationalHalfspace(tuple(abar), bbar, box), est, sigma, samples, k)
    raise ApproximationError(
        f"no {max_bits}-bit rounding reached eps={eps} (last estimate {est})", achieved=est
    )


# --------------------------------------------------------------------------
# computable witness replacement


@dataclass
class Replacement:
    point: PointGen
    precision_used: int | None
    statuses: list
    branch: str  # "open-cell" or "boundary"


def computable_replacement(
    y: PointGen, oracles: Sequence[MembershipOracle], precision: int
) -> Replacement:
    """Find an eventually periodic x with the same memberships as y in each concept.

    Grows a prefix of y until every concept decides it and the candidate
    ``prefix + 000...`` is decided the same way. If that never happens within
    ``precision`` bits, y itself is returned when it is finitely described.
    """
    start = 0 if not oracles else 1
    for m in range(start, precision + 1):
        wanted = [decide_point(o, y, m) for o in oracles]
        if UNRESOLVED in wanted:
            continue
        x = EventuallyPeriodic(y.prefix(m), "0")
        if [decide_point(o, x, max(m, 1)) for o in oracles] == wanted:
            return Replacement(x, m, wanted, "open-cell")
    if y.finite:
        statuses = [decide_point(o, y, precision) for o in oracles]
        return Replacement(y, None, statuses, "boundary")
    raise PrecisionError(
        f"membership of {y.describe()} unresolved within {precision} bits and it has no finite description"
    )


__all__ = [
    "And", "Const", "DGon", "DGonTree", "Formula", "FormulaTree", "Gaussian",
    "HalfspaceTree", "IntervalTree", "Not", "Or", "RationalHalfspace",
    "RationalInterval", "RationalizeResult", "Replacement", "UniformBox", "Var",
    "computable_replacement", "dgon_from_vertices", "dgon_tree", "feasible",
    "formula_tree", "halfspace_tree", "interval_tree", "parse_formula",
    "rationalize_hyperplane", "symmetric_difference_mass", "IN", "OUT", "UNRESOLVED",
]
