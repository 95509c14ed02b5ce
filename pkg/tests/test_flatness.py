"""Flatness criterion, compatible boundaries and the step-tuple view."""
import random

import pytest
from hypothesis import given, settings, strategies as st

from flatplan.errors import DomainError, RejectNotStepForm, SupportMismatch
from flatplan.flatness import (
    Boundary,
    MeasureTuple,
    as_step_tuple,
    check_flat_criterion,
    in_vnc,
    is_c_compatible,
    rebuild_matches,
    tuple_inequality_report,
    uniform_tuple_membership,
)
from flatplan.generators import random_step_tuple
from flatplan.measures import DecreasingMeasure, Segment, dirac, mixture, uniform


def two_part(l, p, r, a=0.5):
    return mixture(l, [(a, p), (1 - a, r)])


class TestCompatible:
    def test_equality_is_compatible(self):
        assert is_c_compatible(Boundary((0, 0), (1, 1)), 1.0)

    def test_too_wide(self):
        assert not is_c_compatible(Boundary((0, 0), (1, 1)), 0.5)

    def test_shifted_segments(self):
        assert is_c_compatible(Boundary((0, 2), (1, 3)), 3.0)

    def test_reversed_boundary(self):
        with pytest.raises(DomainError):
            Boundary((1,), (0,))


class TestCriterion:
    def test_uniform_cube(self):
        v = check_flat_criterion(MeasureTuple.of([uniform(0, 1)] * 3))
        assert v.flat and v.C == 1.5 and v.witness is None

    def test_dirac_plus_uniform(self):
        v = check_flat_criterion(MeasureTuple.of([dirac(0), uniform(0, 1)]))
        assert not v.flat
        assert v.to_json()["witness"] == 2

    def test_reflection_pair(self):
        v = check_flat_criterion(MeasureTuple.of([uniform(0, 1), uniform(2, 3)]))
        assert v.flat and v.C == 3.0

    def test_support_mismatch(self):
        short = DecreasingMeasure.build(0, 2, 0.0, [(1, 1.0)])
        with pytest.raises(SupportMismatch):
            check_flat_criterion(MeasureTuple.of([short, uniform(0, 2)]))

    def test_declared_C_mismatch(self):
        with pytest.raises(DomainError):
            MeasureTuple.of([uniform(0, 1)] * 2, C=1.2)

    def test_needs_two_items(self):
        with pytest.raises(DomainError):
            MeasureTuple.of([uniform(0, 1)])

    def test_json_shape(self):
        d = check_flat_criterion(MeasureTuple.of([uniform(0, 1)] * 2)).to_json()
        assert list(d) == ["flat", "C", "witness", "slacks"]


class TestUniformMembership:
    def test_equality_case(self):
        v = uniform_tuple_membership([Segment(0, 1), Segment(0, 1), Segment(0, 2)])
        assert v.in_vnc and v.equality == [2]

    def test_too_wide(self):
        assert not uniform_tuple_membership([Segment(0, 1), Segment(0, 3)]).in_vnc

    def test_diracs(self):
        v = uniform_tuple_membership([Segment(0, 0), Segment(0, 0)])
        assert v.in_vnc


class TestStepView:
    def test_all_uniform(self):
        v = as_step_tuple(MeasureTuple.of([uniform(0, 1)] * 3))
        assert [it.p for it in v.items] == [1, 1, 1]

    def test_two_part_items(self):
        t = MeasureTuple.of([two_part(0, 0.5, 1), two_part(0, 0.5, 1), uniform(0, 1)])
        assert t.C == 1.25
        v = as_step_tuple(t)
        assert [it.alpha for it in v.items[:2]] == [0.5, 0.5]
        assert [it.p for it in v.items] == [0.5, 0.5, 1]

    def test_atom_rejected(self):
        t = MeasureTuple.of([DecreasingMeasure.build(0, 1, 0.3, [(1, 0.7)]), uniform(0, 1), uniform(0, 1)])
        with pytest.raises(RejectNotStepForm) as exc:
            as_step_tuple(t)
        assert 0 in exc.value.reasons

    def test_atom_allowed_when_asked(self):
        t = MeasureTuple.of([DecreasingMeasure.build(0, 1, 0.3, [(1, 0.7)]), uniform(0, 1), uniform(0, 1)])
        v = as_step_tuple(t, allow_atoms=True)
        assert v.items[0].p == 0 and v.items[0].alpha == 0.3

    def test_three_components_rejected(self):
        t = MeasureTuple.of([mixture(0, [(0.2, 0.3), (0.3, 0.6), (0.5, 1)]), uniform(0, 1), uniform(0, 1)])
        with pytest.raises(RejectNotStepForm):
            as_step_tuple(t)

    def test_incompatible_boundary_rejected(self):
        with pytest.raises(RejectNotStepForm):
            as_step_tuple(MeasureTuple.of([dirac(0), uniform(0, 1)]))

    def test_dirac_item_viewed(self):
        v = as_step_tuple(MeasureTuple.of([dirac(0.3), dirac(0.7)]))
        assert v.items[0].l == v.items[0].p == v.items[0].r == 0.3


class TestInequalityReport:
    def test_uniform_pair_rigid(self):
        t = MeasureTuple.of([uniform(0, 1)] * 2)
        rep = tuple_inequality_report(as_step_tuple(t), t.C)
        assert rep.mean_sum_slack == 0 and rep.rigid

    def test_two_part_slack(self):
        t = MeasureTuple.of([two_part(0, 0.5, 1), two_part(0, 0.5, 1), uniform(0, 1)])
        rep = tuple_inequality_report(as_step_tuple(t), t.C)
        assert rep.mean_sum_slack == pytest.approx(0.25, abs=1e-15) and not rep.rigid

    def test_dirac_tuple(self):
        t = MeasureTuple.of([dirac(0.3), dirac(0.7)])
        rep = tuple_inequality_report(as_step_tuple(t), t.C)
        assert rep.mean_sum_slack == pytest.approx(0, abs=1e-15)
        assert all(abs(s) < 1e-15 for s in rep.right_sum_slacks)


# -- properties -------------------------------------------------------------

@given(st.integers(0, 10**6), st.floats(0.1, 10), st.floats(-5, 5))
@settings(max_examples=100)
def test_criterion_scale_equivariant(seed, a, b):
    rng = random.Random(seed)
    items = [uniform(l, l + d) for l, d in ((rng.uniform(-1, 1), rng.uniform(0, 1))
                                            for _ in range(rng.randint(2, 4)))]
    items[0] = two_part(items[0].l, items[0].l + 0.3 * (items[0].r - items[0].l), items[0].r, rng.random())
    t = MeasureTuple.of(items)
    v1 = check_flat_criterion(t)
    v2 = check_flat_criterion(t.affine(a, b))
    margin = min(abs(s) for s in v1.slacks)
    if margin > 1e-9 * max(1.0, a):
        assert v1.flat == v2.flat
        assert v1.witness == v2.witness


@given(st.integers(0, 10**6))
@settings(max_examples=200)
def test_step_view_rebuilds_exactly(seed):
    t = random_step_tuple(random.Random(seed), random.Random(seed).randint(2, 4))
    v = as_step_tuple(t)
    assert rebuild_matches(v, t)


@given(st.integers(0, 10**6))
@settings(max_examples=200)
def test_right_sum_inequality_holds(seed):
    t = random_step_tuple(random.Random(seed), 3 + seed % 2)
    rep = tuple_inequality_report(as_step_tuple(t), t.C)
    assert min(rep.right_sum_slacks) >= -1e-10


@given(st.integers(0, 10**6))
@settings(max_examples=100)
def test_random_step_tuples_in_vnc(seed):
    t = random_step_tuple(random.Random(seed), 2 + seed % 3)
    assert in_vnc(t)
