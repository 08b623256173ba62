import math
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from effpac.cantor import BitSource, EventuallyPeriodic, RationalPoint, cell_of, interleave_encode
from effpac.concepts import (
    DGon,
    DGonTree,
    FormulaTree,
    HalfspaceTree,
    IntervalTree,
    RationalHalfspace,
    RationalInterval,
    UniformBox,
    computable_replacement,
    dgon_from_vertices,
    feasible,
    parse_formula,
    rationalize_hyperplane,
)
from effpac.errors import ApproximationError, DomainError, PrecisionError
from effpac.pi01 import EXCLUDED, INCLUDED, IN, OUT, MembershipOracle, decide_point, node_status

HALF = F(1, 2)


def first_exclusion(tree, sigma):
    return next((s for s in range(len(sigma) + 1) if node_status(tree, sigma, s) == EXCLUDED), None)


def corner_min(a, cell):
    return sum(min(c * lo, c * hi) for c, (lo, hi) in zip(a, cell))


# formulas


def test_single_literal_paths():
    t = FormulaTree("x0")
    for w in ("0", "1", "01", "11"):
        assert node_status(t, w, 4) == (INCLUDED if w[0] == "1" else EXCLUDED)


def test_contradiction_is_empty_by_stage_one():
    t = FormulaTree("x0 & ~x0")
    assert all(node_status(t, "", s) == EXCLUDED for s in range(1, 5))


def test_three_variable_formula():
    t = FormulaTree("(x0 | x1) & (~x0 | x2)")
    assert node_status(t, "010", 3) == INCLUDED
    assert first_exclusion(t, "100") == 3


def test_parse_errors():
    for bad in ("x0 &", "(x1", "y2", ""):
        with pytest.raises(Exception):
            parse_formula(bad)


# intervals and half-spaces


def test_interval_examples():
    full = IntervalTree(RationalInterval(F(0), F(1)))
    assert all(node_status(full, w, 5) == INCLUDED for w in ("", "0", "1111", "10101"))
    assert first_exclusion(IntervalTree(RationalInterval(F(0), HALF)), "11") == 2
    third = IntervalTree(RationalInterval(F(1, 3), F(2, 3)))
    assert all(node_status(third, "01", s) == INCLUDED for s in range(6))


def test_halfspace_examples():
    assert all(
        node_status(HalfspaceTree(RationalHalfspace((F(1), F(0)), F(1))), w, 6) == INCLUDED
        for w in ("", "11", "111111")
    )
    # cell [1/2,1) x [1/2,1) is the prefix "11" under interleaving
    assert node_status(HalfspaceTree(RationalHalfspace((F(1), F(1)), F(0))), "11", 2) == EXCLUDED
    # cell [1/4,1/2) x [0,1): x1 bits 01, x2 free -> "0?1"
    for w in ("001", "011"):
        assert node_status(HalfspaceTree(RationalHalfspace((F(1), F(0)), HALF)), w, 3) == INCLUDED


def test_triangle_examples():
    whole = dgon_from_vertices([(0, 0), (2, 0), (0, 2)])
    assert all(node_status(DGonTree(whole), w, 6) == INCLUDED for w in ("", "1111", "0101"))
    tri = DGonTree(dgon_from_vertices([(0, 0), (1, 0), (0, 1)]))
    # "1111" decodes to the cell [3/4,1)^2; the first prefix whose closed cell leaves the
    # triangle is "111" = [3/4,1] x [1/2,1], since "11" = [1/2,1]^2 still touches (1/2,1/2)
    assert first_exclusion(tri, "1111") == 3
    assert cell_of("11", 2) == [(HALF, F(1)), (HALF, F(1))]


def test_empty_dgon():
    hs = (
        RationalHalfspace((F(1), F(0)), F(-1)),
        RationalHalfspace((F(0), F(1)), F(1)),
        RationalHalfspace((F(-1), F(-1)), F(0)),
    )
    with pytest.raises(DomainError):
        DGon(hs)
    t = DGonTree(DGon(hs, allow_empty=True))
    assert node_status(t, "", 1) == EXCLUDED


def test_feasible_small_systems():
    assert feasible([((F(1),), F(1)), ((F(-1),), F(0))])
    assert not feasible([((F(1),), F(0)), ((F(-1),), F(-1))])


a_st = st.tuples(st.fractions(-2, 2, max_denominator=4), st.fractions(-2, 2, max_denominator=4)).filter(any)


@given(a_st, st.fractions(-2, 2, max_denominator=8), st.text("01", max_size=8), st.integers(0, 8))
def test_halfspace_status_matches_corner_oracle(a, b, sigma, s):
    cell = cell_of(sigma[:s], 2)
    expected = EXCLUDED if corner_min(a, cell) > b else INCLUDED
    assert node_status(HalfspaceTree(RationalHalfspace(a, b)), sigma, s) == expected


# rationalize


def test_exact_hyperplane_unchanged():
    res = rationalize_hyperplane([F(1), F(-1, 3)], F(1, 5), UniformBox(2), F(1, 100))
    assert res.halfspace.a == (F(1), F(-1, 3)) and res.halfspace.b == F(1, 5)
    assert res.mass == 0


def test_pi_quarter_one_dimension():
    res = rationalize_hyperplane([1.0], math.pi / 4, UniformBox(1), F(1, 100), seed=3)
    assert res.halfspace.a == (F(1),)
    assert abs(float(res.halfspace.b) - math.pi / 4) < 0.01


def test_vacuous_tolerance():
    # 0.3 rounds to 0 at zero bits, which is no half-space; the next rounding is taken
    res = rationalize_hyperplane([0.3], 0.71, UniformBox(1), F(1), seed=0)
    assert res.bits == 1


def test_unreachable_tolerance_raises():
    with pytest.raises(ApproximationError):
        rationalize_hyperplane([1.0], math.pi / 4, UniformBox(1), F(1, 10**9), samples=1000, max_bits=6)


# computable replacement


def test_no_concepts_gives_zero_point():
    r = computable_replacement(BitSource(lambda i: i % 2), [], 8)
    assert r.point.prefix(16) == "0" * 16


def test_external_point_outside_half_interval():
    y = BitSource(lambda i: 1 if i in (0, 1, 3, 6) else 0, "y")
    r = computable_replacement(y, [MembershipOracle(IntervalTree(RationalInterval(F(0), HALF)))], 16)
    assert r.point == EventuallyPeriodic("11", "0")
    assert r.statuses == [OUT]


def test_interior_point_keeps_prefix():
    y = BitSource(lambda i: int(i % 3 == 0), "y")  # 0.100100... = 4/7
    ivs = [RationalInterval(F(1, 2), F(5, 8)), RationalInterval(F(0), F(3, 4)), RationalInterval(F(9, 16), F(1))]
    r = computable_replacement(y, [MembershipOracle(IntervalTree(i)) for i in ivs], 16)
    assert r.statuses == [IN, IN, IN]
    assert r.point.prefix(r.precision_used) == y.prefix(r.precision_used)
    assert r.point.period == "0"


def test_unresolved_external_source_raises():
    y = BitSource(lambda i: 1 if i == 0 else 0, "half")  # exactly 1/2 but no description
    with pytest.raises(PrecisionError):
        computable_replacement(y, [MembershipOracle(IntervalTree(RationalInterval(F(0), HALF)))], 12)


def test_boundary_described_point_returned_as_is():
    y = RationalPoint((HALF,))
    r = computable_replacement(y, [MembershipOracle(IntervalTree(RationalInterval(F(0), HALF)))], 12)
    assert r.branch == "boundary" and r.point == y


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.fractions(0, 1, max_denominator=16), st.fractions(0, 1, max_denominator=16)), max_size=3),
       st.fractions(0, 1, max_denominator=1000).filter(lambda x: x < 1))
def test_replacement_agrees(ends, y):
    ivs = [RationalInterval(min(a, b), max(a, b)) for a, b in ends]
    if any(y in (i.lo, i.hi) for i in ivs):
        return
    oracles = [MembershipOracle(IntervalTree(i)) for i in ivs]
    r = computable_replacement(interleave_encode([y]), oracles, 32)
    truth = [IN if i.lo <= y <= i.hi else OUT for i in ivs]
    assert r.statuses == truth
    assert [decide_point(o, r.point, 40) for o in oracles] == truth
