import itertools
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from effpac.cantor import EventuallyPeriodic, RationalPoint
from effpac.concepts import IntervalTree, RationalInterval
from effpac.errors import DomainError
from effpac.pi01 import EMPTY_TREE, ConceptClassEnum, FinitePathTree
from effpac.vc import WitnessPool, infinite_vc_horizon_check, is_shattered, shatter_count, vc_lower_bound, vc_report

A, B, C3 = EventuallyPeriodic("1", "0"), EventuallyPeriodic("01", "0"), EventuallyPeriodic("001", "0")


def intervals(ends):
    return ConceptClassEnum([IntervalTree(RationalInterval(min(a, b), max(a, b))) for a, b in ends])


def grid_intervals(n):
    return [(F(a, n), F(b, n)) for a in range(n + 1) for b in range(a, n + 1)]


def brute_traces(ends, xs):
    return {frozenset(i for i, x in enumerate(xs) if min(a, b) <= x <= max(a, b)) for a, b in ends}


def test_empty_set_has_one_trace():
    assert shatter_count(intervals([(0, 1)]), 1, [], 8).count == 1
    assert is_shattered(intervals([(0, 1)]), 1, [], 8)


def test_singletons_class():
    C = ConceptClassEnum([EMPTY_TREE, FinitePathTree([A]), FinitePathTree([B]), FinitePathTree([C3])])
    rep = shatter_count(C, 4, [A, B], 8)
    assert rep.count == 3 and not rep.shattered
    assert sorted(map(sorted, (rep.to_json()["traces"]))) == [[], [0], [1]]


def test_two_points_shattered_by_intervals():
    C = intervals(grid_intervals(4))
    assert is_shattered(C, len(C), [RationalPoint((F(1, 8),)), RationalPoint((F(5, 8),))], 16)


def test_d_zero_is_found():
    pool = WitnessPool([A, B], 8)
    res = vc_lower_bound(intervals([(0, 1)]), 1, pool, 0, 8)
    assert res.found and res.witness == []


def test_pool_rejects_prefix_collisions():
    with pytest.raises(DomainError):
        WitnessPool([EventuallyPeriodic("1", "0"), EventuallyPeriodic("1000", "1")], 4)


def test_pool_json_round_trip():
    pool = WitnessPool([A, RationalPoint((F(1, 3),))], 12)
    again = WitnessPool.from_json(pool.to_json())
    assert [p.prefix(12) for p in again.points] == [p.prefix(12) for p in pool.points]


def test_horizon_check_on_built_class():
    pts = [A, B, C3]
    subsets = [S for r in range(4) for S in itertools.combinations(pts, r)]
    C = ConceptClassEnum([FinitePathTree(S) for S in subsets])
    pool = WitnessPool(pts + [EventuallyPeriodic("0001", "0")], 8)
    assert all(infinite_vc_horizon_check(C, n, pool, len(C), 8) for n in range(1, 4))
    assert not infinite_vc_horizon_check(C, 4, pool, len(C), 8)
    empties = ConceptClassEnum([EMPTY_TREE] * 3)
    assert not infinite_vc_horizon_check(empties, 1, pool, 3, 8)


def test_report_fields():
    C = intervals(grid_intervals(8))
    pool = WitnessPool([RationalPoint((F(2 * i + 1, 16),)) for i in range(8)], 16)
    rep = vc_report(C, len(C), pool, 2, 16)
    assert rep["found"] and rep["pool_vc_dimension"] == 2
    assert rep["shatter_counts"] == {"0": 1, "1": 2, "2": 4}
    assert vc_report(C, len(C), pool, 3, 16)["shatter_counts"]["3"] == 7


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.tuples(st.fractions(0, 1, max_denominator=12), st.fractions(0, 1, max_denominator=12)), min_size=1, max_size=20),
    st.lists(st.fractions(0, 1, max_denominator=24).filter(lambda x: x < 1), min_size=0, max_size=6, unique=True),
)
def test_shatter_count_matches_brute_force(ends, xs):
    C = intervals(ends)
    # avoid interval endpoints so every membership is decided at finite precision
    xs = [x for x in xs if all(x not in (a, b) for a, b in ends)]
    rep = shatter_count(C, len(C), [RationalPoint((x,)) for x in xs], 24)
    assert rep.count == len(brute_traces(ends, xs))
