"""Exact rational oracle: tableau, minimum cost and slice feasibility."""
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from flatplan.errors import AlignmentError, SizeExceeded
from flatplan.flatness import MeasureTuple
from flatplan.measures import dirac, uniform
from flatplan.oracle import (
    ExactGrid,
    RationalTableau,
    feasible_report,
    min_cost_report,
    oracle_feasible_on_slice,
    oracle_min_cost,
    oracle_tuple,
    rational_histograms,
    slice_points,
    snap_weights,
)
from flatplan.selftest import random_agreement_instance


def tup(*items):
    return MeasureTuple.of(items)


def exact(t, h):
    return rational_histograms(t, Fraction(h))


class TestTableau:
    def test_feasible_system(self):
        tab = RationalTableau([{0: 1, 1: 1}, {0: 1}], [Fraction(1), Fraction(1, 4)], 2)
        assert tab.phase_one()
        x = tab.solution()
        assert x == {0: Fraction(1, 4), 1: Fraction(3, 4)}
        assert tab.residual_exact()

    def test_infeasible_system(self):
        tab = RationalTableau([{0: 1}, {0: 1}], [Fraction(1, 2), Fraction(1, 3)], 1)
        assert not tab.phase_one()

    def test_redundant_row_dropped(self):
        tab = RationalTableau([{0: 1, 1: 1}, {0: 1, 1: 1}], [Fraction(1), Fraction(1)], 2)
        assert tab.phase_one() and tab.residual_exact()

    def test_phase_two_minimizes(self):
        tab = RationalTableau([{0: 1, 1: 1, 2: 1}], [Fraction(1)], 3)
        assert tab.phase_one()
        tab.phase_two([3, 1, 2])
        assert tab.solution() == {1: Fraction(1)}


class TestMinCost:
    def test_uniform_pair_zero(self):
        grid, hists = exact(tup(uniform(0, 1), uniform(0, 1)), 0.25)
        assert oracle_min_cost(hists, grid, 1) == 0

    def test_dirac_uniform_near_twelfth(self):
        grid, hists = exact(tup(dirac(0), uniform(0, 1)), Fraction(1, 64))
        value = oracle_min_cost(hists, grid, Fraction(1, 2))
        assert value == Fraction(683, 8192)
        assert abs(value - Fraction(1, 12)) <= Fraction(1, 100)

    def test_dirac_uniform_matches_direct_sum(self):
        # the only coupling is the product, so the cost is the variance about 1/2
        h = Fraction(1, 64)
        w = [h / 2] + [h] * 63 + [h / 2]
        direct = sum(wi * (i * h - Fraction(1, 2)) ** 2 for i, wi in enumerate(w))
        grid, hists = exact(tup(dirac(0), uniform(0, 1)), h)
        assert hists[1] == w
        assert oracle_min_cost(hists, grid, Fraction(1, 2)) == direct

    def test_dirac_pair_zero(self):
        grid, hists = exact(tup(dirac(0.3), dirac(0.7)), 0.1)
        assert oracle_min_cost(hists, grid, 1) == 0

    def test_result_is_exact(self):
        grid, hists = exact(tup(uniform(0, 1), uniform(0, 1), uniform(0, 1)), 0.25)
        res = min_cost_report(hists, grid, Fraction(3, 2))
        assert res.exact and res.value == 0
        assert sum(w for _, w in res.support) == 1

    def test_size_exceeded(self):
        grid, hists = exact(tup(uniform(0, 1), uniform(0, 1), uniform(0, 1), uniform(0, 1)), Fraction(1, 32))
        with pytest.raises(SizeExceeded):
            oracle_min_cost(hists, grid, 2)


class TestFeasible:
    def test_uniform_cube(self):
        grid, hists = exact(tup(uniform(0, 1), uniform(0, 1), uniform(0, 1)), 0.25)
        assert oracle_feasible_on_slice(hists, grid, Fraction(3, 2))

    @pytest.mark.parametrize("h", [Fraction(1, 4), Fraction(1, 8), Fraction(1, 64)])
    def test_dirac_uniform(self, h):
        grid, hists = exact(tup(dirac(0), uniform(0, 1)), h)
        assert not oracle_feasible_on_slice(hists, grid, Fraction(1, 2))

    def test_reflection(self):
        grid, hists = exact(tup(uniform(0, 1), uniform(2, 3)), 0.25)
        assert oracle_feasible_on_slice(hists, grid, 3)

    def test_off_lattice_level_has_empty_slice(self):
        grid, hists = exact(tup(uniform(0, 1), uniform(0, 1)), 0.25)
        assert slice_points(grid, [[0, 1, 2, 3, 4]] * 2, Fraction(1, 3)) == []
        assert not feasible_report(hists, grid, Fraction(1, 3)).feasible

    def test_misaligned_width(self):
        with pytest.raises(AlignmentError):
            exact(tup(uniform(0, 1), uniform(0, 1)), 0.3)


def test_snap_weights_sum_exactly_one():
    ws = snap_weights([0.1, 0.2, 0.7])
    assert sum(ws) == 1 and ws[:2] == [Fraction(1, 10), Fraction(1, 5)]


def test_tuple_report_renders_rationals():
    d = oracle_tuple(tup(dirac(0), uniform(0, 1)), 1 / 64)
    assert d["h"] == "1/64" and d["min_cost"] == "683/8192"
    assert d["feasible_on_slice"] is False and d["exact"]


def test_slice_points_brute_force():
    g = ExactGrid(Fraction(1, 2), (Fraction(0), Fraction(1), Fraction(-1)), (3, 4, 2))
    supp = [[0, 2], [0, 1, 3], [0, 1]]
    C = Fraction(3, 2)
    brute = [(a, b, c) for a in supp[0] for b in supp[1] for c in supp[2]
             if sum(g.position(k, i) for k, i in enumerate((a, b, c))) == C]
    assert slice_points(g, supp, C) == brute


# -- properties -------------------------------------------------------------

@given(st.integers(0, 10**6), st.booleans())
@settings(max_examples=60, deadline=None)
def test_min_zero_iff_slice_feasible(seed, feasible):
    rng = random.Random(seed)
    grid, hists, C = random_agreement_instance(rng, feasible)
    C = Fraction(C)
    res = min_cost_report(hists, grid, C)
    assert res.exact
    assert (res.value == 0) == oracle_feasible_on_slice(hists, grid, C)
    if feasible:
        assert res.value == 0


@given(st.integers(0, 10**6))
@settings(max_examples=60, deadline=None)
def test_basis_resubstitution_exact(seed):
    grid, hists, C = random_agreement_instance(random.Random(seed), seed % 2 == 0)
    rep = feasible_report(hists, grid, Fraction(C))
    if rep.feasible:
        assert rep.exact
        for k, h in enumerate(hists):
            marg = [Fraction(0)] * len(h)
            for idx, w in rep.support:
                marg[idx[k]] += w
            assert marg == list(h)
