"""Flatness criterion, C-compatible boundaries and step C-compatible tuples.

All indices in this module are 0-based.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import DomainError, FlatPlanError, RejectNotStepForm, SupportMismatch
from .measures import (
    EQ_TOL,
    MASS_TOL,
    DecreasingMeasure,
    Segment,
    expectation,
    uniform,
)

CRITERION_TOL = 1e-12
IDENTITY_TOL = 1e-10


@dataclass(frozen=True)
class MeasureTuple:
    items: tuple[DecreasingMeasure, ...]
    C: float

    @classmethod
    def of(cls, items: Sequence[DecreasingMeasure], C: float | None = None) -> "MeasureTuple":
        items = tuple(items)
        if len(items) < 2:
            raise DomainError("a measure tuple needs N >= 2 items")
        total = math.fsum(expectation(m) for m in items)
        if C is None:
            C = total
        elif abs(C - total) > EQ_TOL:
            raise DomainError(f"declared C={C!r} but expectations sum to {total!r}")
        return cls(items, float(C))

    @property
    def N(self) -> int:
        return len(self.items)

    def __len__(self):
        return len(self.items)

    def __getitem__(self, k):
        return self.items[k]

    def affine(self, a: float, b: float) -> "MeasureTuple":
        return MeasureTuple.of([m.affine(a, b) for m in self.items])


@dataclass(frozen=True)
class Boundary:
    l: tuple[float, ...]
    r: tuple[float, ...]

    def __post_init__(self):
        if len(self.l) != len(self.r):
            raise DomainError("boundary tuples differ in length")
        for a, b in zip(self.l, self.r):
            if not a <= b:
                raise DomainError(f"boundary needs l <= r, got ({a}, {b})")

    @property
    def widths(self) -> list[float]:
        return [b - a for a, b in zip(self.l, self.r)]


def compatibility_slacks(b: Boundary, C: float) -> list[float]:
    """``(C - sum(l)) - (r_k - l_k)`` for each k; nonnegative means compatible."""
    room = C - math.fsum(b.l)
    return [room - w for w in b.widths]


def is_c_compatible(b: Boundary, C: float, tol: float = CRITERION_TOL) -> bool:
    return all(s >= -tol for s in compatibility_slacks(b, C))


def support_boundary(t: MeasureTuple) -> Boundary:
    """Smallest boundary whose D-classes contain every item."""
    return Boundary(tuple(m.l for m in t.items), tuple(m.support_right for m in t.items))


def in_vnc(t: MeasureTuple, C: float | None = None, tol: float = EQ_TOL) -> bool:
    """Membership in V^N[C].

    The left endpoint of each D-class is forced (it is the leftmost support
    point), and enlarging a right endpoint only tightens the compatibility
    inequalities, so checking the support boundary is exact.
    """
    if C is None:
        C = t.C
    total = math.fsum(expectation(m) for m in t.items)
    if abs(total - C) > tol:
        return False
    return is_c_compatible(support_boundary(t), C, tol)


@dataclass
class FlatVerdict:
    flat: bool
    C: float
    witness: int | None
    slacks: list[float]

    def to_json(self) -> dict:
        # witness is reported 1-based in serialized output
        return {"flat": self.flat, "C": self.C,
                "witness": None if self.witness is None else self.witness + 1,
                "slacks": list(self.slacks)}


def _check_support(t: MeasureTuple) -> None:
    for k, m in enumerate(t.items):
        if m.r > m.l and (not m.parts or m.parts[-1][0] != m.r):
            raise SupportMismatch(
                f"item {k + 1}: support ends at {m.support_right}, declared r={m.r}")


def check_flat_criterion(t: MeasureTuple, tol: float = CRITERION_TOL) -> FlatVerdict:
    """Flat iff ``r_k - l_k <= C - sum(l)`` for every k (equality allowed)."""
    _check_support(t)
    b = Boundary(tuple(m.l for m in t.items), tuple(m.r for m in t.items))
    slacks = compatibility_slacks(b, t.C)
    witness = next((k for k, s in enumerate(slacks) if s < -tol), None)
    return FlatVerdict(witness is None, t.C, witness, slacks)


@dataclass
class UniformVerdict:
    in_vnc: bool
    C: float
    equality: list[int]
    slacks: list[float]


def uniform_tuple_membership(segments: Sequence[Segment], tol: float = CRITERION_TOL) -> UniformVerdict:
    """Membership of ``(lambda[l_k, r_k])_k`` in V^N[C] with C the sum of midpoints."""
    widths = [s.r - s.l for s in segments]
    total = math.fsum(widths)
    C = math.fsum((s.l + s.r) / 2 for s in segments)
    slacks = [(total - w) - w for w in widths]
    ok = all(s >= -tol for s in slacks)
    equality = [k for k, s in enumerate(slacks) if abs(s) <= tol]
    return UniformVerdict(ok, C, equality, slacks)


@dataclass(frozen=True)
class StepItem:
    """``alpha * lambda[l, p] + rest * lambda[l, r]`` with ``rest = 1 - alpha``."""

    l: float
    p: float
    r: float
    alpha: float
    rest: float | None = None

    @property
    def weight_r(self) -> float:
        return 1.0 - self.alpha if self.rest is None else self.rest

    @property
    def width(self) -> float:
        return self.r - self.l

    @property
    def two_part(self) -> bool:
        return self.p < self.r

    @property
    def is_uniform(self) -> bool:
        return self.p == self.r

    def measure(self) -> DecreasingMeasure:
        return DecreasingMeasure.build(self.l, self.r, 0.0,
                                       [(self.p, self.alpha), (self.r, self.weight_r)])

    def density_left(self) -> float:
        """Density on ``[l, p)`` (``inf`` when ``p == l``)."""
        if self.r == self.l:
            return math.inf
        d = self.weight_r / (self.r - self.l)
        if self.p == self.l:
            return math.inf
        return d + self.alpha / (self.p - self.l)


@dataclass(frozen=True)
class StepTupleView:
    items: tuple[StepItem, ...]
    C: float

    @property
    def N(self) -> int:
        return len(self.items)

    @property
    def l(self) -> list[float]:
        return [it.l for it in self.items]

    @property
    def r(self) -> list[float]:
        return [it.r for it in self.items]

    @property
    def widths(self) -> list[float]:
        return [it.width for it in self.items]

    def boundary(self) -> Boundary:
        return Boundary(tuple(self.l), tuple(self.r))

    def to_tuple(self) -> MeasureTuple:
        return MeasureTuple.of([it.measure() for it in self.items])


def step_item(m: DecreasingMeasure, allow_atoms: bool = False) -> StepItem:
    """Read one measure as a two-uniform mixture; raises ValueError with a reason."""
    if m.is_dirac:
        return StepItem(m.l, m.l, m.l, 0.5)
    if m.atom > 0:
        if not allow_atoms:
            raise ValueError("atom present; re-encode delta(l) as lambda[l, l]")
        if len(m.parts) != 1:
            raise ValueError("atom plus more than one uniform component")
        t, w = m.parts[0]
        return StepItem(m.l, m.l, t, m.atom, w)
    if len(m.parts) == 1:
        return StepItem(m.l, m.parts[0][0], m.parts[0][0], 0.5)
    if len(m.parts) == 2:
        (p, a), (r, w) = m.parts
        return StepItem(m.l, p, r, a, w)
    raise ValueError(f"{len(m.parts)} uniform components (at most 2 allowed)")


def as_step_tuple(t: MeasureTuple, allow_atoms: bool = False) -> StepTupleView:
    """View ``t`` as a step C-compatible tuple.

    By default an item with a partial atom at ``l`` is rejected; pass
    ``allow_atoms=True`` to read ``a*delta(l) + (1-a)*lambda[l, r]`` as the
    degenerate form ``p = l``.  Pure Dirac items are always accepted.
    """
    reasons = {}
    items = []
    for k, m in enumerate(t.items):
        try:
            items.append(step_item(m, allow_atoms))
        except ValueError as exc:
            reasons[k] = str(exc)
    if reasons:
        raise RejectNotStepForm(reasons)
    view = StepTupleView(tuple(items), t.C)
    slacks = compatibility_slacks(view.boundary(), t.C)
    bad = {k: f"width exceeds C - sum(l) by {-s:.3g}" for k, s in enumerate(slacks)
           if s < -CRITERION_TOL}
    if bad:
        raise RejectNotStepForm(bad)
    return view


@dataclass
class InequalityReport:
    mean_sum_slack: float
    rigid: bool
    right_sum_slacks: list[float]
    right_sum_equality: list[int]


def tuple_inequality_report(v: StepTupleView, C: float, tol: float = IDENTITY_TOL) -> InequalityReport:
    """Slacks of ``C <= sum((l+r)/2)`` and ``sum(r) >= C + (r_k - l_k)``.

    Equality in either family forces every item to be ``lambda[l_k, r_k]``;
    the report flags it as ``rigid`` / ``right_sum_equality``.
    """
    mean_sum = math.fsum((a + b) / 2 for a, b in zip(v.l, v.r))
    mean_slack = mean_sum - C
    rsum = math.fsum(v.r)
    slacks = [rsum - C - w for w in v.widths]
    if min(slacks, default=0.0) < -tol or mean_slack < -tol:
        raise FlatPlanError("step tuple violates sum(r) >= C + width; the view is inconsistent")
    return InequalityReport(mean_slack, abs(mean_slack) <= tol, slacks,
                            [k for k, s in enumerate(slacks) if abs(s) <= tol])


def lebesgue_tuple(segments: Sequence[tuple[float, float]]) -> MeasureTuple:
    return MeasureTuple.of([uniform(a, b) for a, b in segments])


def rebuild_matches(v: StepTupleView, t: MeasureTuple) -> bool:
    return all(it.measure() == m for it, m in zip(v.items, t.items))


__all__ = [
    "MeasureTuple", "Boundary", "StepItem", "StepTupleView", "FlatVerdict",
    "UniformVerdict", "InequalityReport", "is_c_compatible", "compatibility_slacks",
    "check_flat_criterion", "uniform_tuple_membership", "as_step_tuple",
    "tuple_inequality_report", "in_vnc", "support_boundary", "lebesgue_tuple",
    "MASS_TOL",
]
