"""Measures: canonical forms, CDF, validation, mixtures and the averaging operator."""
import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from flatplan.errors import DomainError, LeftEndpointMismatch, MassError, NonincreasingViolation
from flatplan.measures import (
    DecreasingMeasure,
    DiscreteMeasure,
    Segment,
    StepDensity,
    cdf,
    convex_combine,
    dirac,
    expectation,
    from_step_density,
    interval_mass,
    is_extreme_dlre,
    mixture,
    second_moment,
    to_step_density,
    tstar,
    tstar_inverse,
    uniform,
    validate_decreasing,
)

from .strategies import coords, decreasing_measures, discrete_measures


def numeric_cdf(mu, x, n=20000):
    """Midpoint-rule integral of the step density plus the atom, as a cross-check."""
    sd = to_step_density(mu)
    if x <= mu.l:
        return 0.0
    total = mu.atom
    for (a, b), d in zip(zip(sd.breakpoints, sd.breakpoints[1:]), sd.values):
        hi = min(b, x)
        if hi > a:
            step = (hi - a) / n
            total += sum(d * step for _ in range(n))
    return total


class TestFromStepDensity:
    def test_uniform_density(self):
        m = from_step_density(StepDensity((0.0, 1.0), (1.0,)))
        assert m == DecreasingMeasure(Segment(0.0, 1.0), 0.0, ((1.0, 1.0),))

    def test_two_steps(self):
        m = from_step_density(StepDensity((0.0, 0.25, 1.0), (2.0, 2 / 3)))
        assert m.atom == 0.0
        assert [t for t, _ in m.parts] == [0.25, 1.0]
        assert m.parts[0][1] == pytest.approx(1 / 3, abs=1e-15)
        assert m.parts[1][1] == pytest.approx(2 / 3, abs=1e-15)
        for x in (0.1, 0.25, 0.6, 1.0):
            assert cdf(m, x) == pytest.approx(numeric_cdf(m, x), abs=1e-9)

    def test_dirac(self):
        m = from_step_density(StepDensity((0.5,), (), atom=1.0))
        assert m == DecreasingMeasure(Segment(0.5, 0.5), 1.0, ())

    def test_increasing_density_rejected(self):
        with pytest.raises(NonincreasingViolation):
            from_step_density(StepDensity((0.0, 0.5, 1.0), (0.5, 1.5)))

    def test_mass_rejected(self):
        with pytest.raises(MassError):
            from_step_density(StepDensity((0.0, 1.0), (0.9,)))


class TestExpectation:
    def test_uniform(self):
        assert expectation(uniform(0, 1)) == 0.5

    def test_atom_mixture(self):
        assert expectation(DecreasingMeasure.build(0, 1, 0.5, [(1, 0.5)])) == pytest.approx(0.25, abs=1e-15)

    def test_two_uniforms(self):
        assert expectation(mixture(0, [(0.5, 0.5), (0.5, 1)])) == pytest.approx(0.375, abs=1e-15)

    def test_second_moment_uniform(self):
        assert second_moment(uniform(0, 1)) == pytest.approx(1 / 3, abs=1e-15)


class TestCdf:
    def test_uniform_half(self):
        assert cdf(uniform(0, 1), 0.5) == 0.5

    def test_atom_right_limit(self):
        m = DecreasingMeasure.build(0, 1, 0.5, [(1, 0.5)])
        assert cdf(m, 0.0) == 0.0
        assert cdf(m, 1e-12) == pytest.approx(0.5, abs=1e-11)

    def test_mixture_at_breakpoint(self):
        m = mixture(0, [(1 / 3, 0.25), (2 / 3, 1)])
        assert cdf(m, 0.25) == pytest.approx(0.5, abs=1e-15)

    def test_left_end_and_beyond(self):
        m = uniform(2, 3)
        assert cdf(m, 2) == 0.0 and cdf(m, 4) == 1.0


class TestValidate:
    def test_uniform_passes(self):
        assert validate_decreasing(uniform(0, 1)).ok

    def test_increasing_density_fails_concavity(self):
        bad = DecreasingMeasure(Segment(0.0, 1.0), 0.0, ((0.5, -0.5), (1.0, 1.5)))
        rep = validate_decreasing(bad)
        assert not rep.ok and rep.check == "concavity"

    def test_atom_heavy_passes_with_bound(self):
        m = DecreasingMeasure.build(0, 1, 0.9, [(1, 0.1)])
        assert validate_decreasing(m).ok
        assert interval_mass(m, 0.5, 1.0) == pytest.approx(0.05, abs=1e-15)
        assert interval_mass(m, 0.5, 1.0) <= (1 - 0.5) / (0.5 - 0)

    def test_probe_count(self):
        assert validate_decreasing(mixture(0, [(0.3, 0.2), (0.7, 1)])).probes_used >= 100


class TestConvexCombine:
    def test_two_uniforms(self):
        m = convex_combine(0.5, uniform(0, 0.5), uniform(0, 1))
        assert m == DecreasingMeasure(Segment(0.0, 1.0), 0.0, ((0.5, 0.5), (1.0, 0.5)))

    def test_alpha_one_is_identity(self):
        mu = mixture(0, [(0.3, 0.5), (0.7, 1)])
        assert convex_combine(1.0, mu, uniform(0, 2)) == mu

    def test_dirac_and_uniform(self):
        m = convex_combine(0.5, dirac(0), uniform(0, 1))
        assert m == DecreasingMeasure(Segment(0.0, 1.0), 0.5, ((1.0, 0.5),))
        assert expectation(m) == 0.25

    def test_left_mismatch(self):
        with pytest.raises(LeftEndpointMismatch):
            convex_combine(0.5, uniform(0, 1), uniform(0.5, 1))


class TestTstar:
    def test_dirac_to_uniform(self):
        assert tstar(DiscreteMeasure.build([(0.7, 1.0)]), 0.0) == uniform(0, 0.7)

    def test_dirac_at_l(self):
        assert tstar(DiscreteMeasure.build([(0.4, 1.0)]), 0.4) == dirac(0.4)

    def test_two_atoms(self):
        nu = DiscreteMeasure.build([(0.4, 0.5), (1.0, 0.5)])
        mu = tstar(nu, 0.0)
        assert mu == mixture(0, [(0.5, 0.4), (0.5, 1.0)])
        assert expectation(mu) == pytest.approx(0.35, abs=1e-15)

    def test_inverse_uniform(self):
        assert tstar_inverse(uniform(0, 1)) == DiscreteMeasure.build([(1.0, 1.0)])

    def test_inverse_dirac(self):
        assert tstar_inverse(dirac(0.2)) == DiscreteMeasure.build([(0.2, 1.0)])

    def test_inverse_atom(self):
        m = DecreasingMeasure.build(0, 1, 0.5, [(1, 0.5)])
        assert tstar_inverse(m) == DiscreteMeasure.build([(0.0, 0.5), (1.0, 0.5)])
        assert tstar(tstar_inverse(m), 0.0) == m

    def test_atom_left_of_l(self):
        with pytest.raises(DomainError):
            tstar(DiscreteMeasure.build([(-1.0, 1.0)]), 0.0)


class TestExtreme:
    def test_two_components(self):
        assert is_extreme_dlre(mixture(0, [(0.3, 0.5), (0.7, 1)]), 0.425)

    def test_uniform(self):
        assert is_extreme_dlre(uniform(0, 1), 0.5)

    def test_three_components(self):
        mu = mixture(0, [(0.2, 0.3), (0.3, 0.6), (0.5, 1)])
        assert not is_extreme_dlre(mu, expectation(mu))


def test_segment_rejects_reversed():
    with pytest.raises(DomainError):
        Segment(1.0, 0.0)


def test_canonical_merges_and_sorts():
    m = DecreasingMeasure.build(0, 1, 0.0, [(1, 0.25), (0.5, 0.25), (1, 0.25), (0, 0.25)])
    assert m.atom == 0.25
    assert m.parts == ((0.5, 0.25), (1.0, 0.5))


def test_negative_weight_rejected():
    with pytest.raises(NonincreasingViolation):
        DecreasingMeasure.build(0, 1, 0.0, [(0.5, -0.5), (1, 1.5)])


def test_step_density_round_trip():
    mu = DecreasingMeasure.build(0, 2, 0.1, [(0.5, 0.3), (2, 0.6)])
    back = from_step_density(to_step_density(mu))
    assert back.atom == mu.atom
    for (t1, w1), (t2, w2) in zip(back.parts, mu.parts):
        assert t1 == t2 and w1 == pytest.approx(w2, abs=1e-15)


# -- properties -------------------------------------------------------------

@given(decreasing_measures())
def test_normalize_idempotent(mu):
    once = mu.normalized()
    assert once.normalized() == once


@given(decreasing_measures())
@settings(max_examples=200)
def test_cdf_concave_and_mass_bound(mu):
    rep = validate_decreasing(mu)
    assert rep.ok, rep.detail


@given(st.data(), coords, st.floats(0, 1))
def test_expectation_linear(data, l, alpha):
    m1 = data.draw(decreasing_measures(l=l))
    m2 = data.draw(decreasing_measures(l=l))
    mix = convex_combine(alpha, m1, m2)
    assert expectation(mix) == pytest.approx(alpha * expectation(m1) + (1 - alpha) * expectation(m2), abs=1e-12)


def test_expectation_linear_1000():
    rng = random.Random(7)

    def draw(l):
        raw = [(rng.random() + 0.01, l + rng.uniform(0.01, 2)) for _ in range(rng.randint(1, 4))]
        s = math.fsum(w for w, _ in raw)
        return mixture(l, [(w / s, t) for w, t in raw])

    for _ in range(1000):
        l = rng.uniform(-1, 1)
        m1, m2 = draw(l), draw(l)
        a = rng.random()
        got = expectation(convex_combine(a, m1, m2))
        assert abs(got - (a * expectation(m1) + (1 - a) * expectation(m2))) <= 1e-12


@given(discrete_measures(), st.floats(0.0, 2.0))
def test_tstar_halves_mean(nu, gap):
    l = nu.atoms[0][0] - gap
    assert expectation(tstar(nu, l)) == pytest.approx((l + nu.expectation()) / 2, abs=1e-12)


@given(decreasing_measures())
def test_tstar_round_trip(mu):
    assert tstar(tstar_inverse(mu), mu.l) == mu


def test_dirac_is_degenerate_segment():
    m = dirac(0.3)
    assert m.l == m.r == 0.3 and m.atom == 1.0 and math.isclose(expectation(m), 0.3)
