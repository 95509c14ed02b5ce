"""Exact rational multimarginal LP used to certify planner outputs.

This is deliberately a different code path from the planner: inputs are
snapped to rationals, the tableau stores exact rationals row by row, and
pivoting uses the most negative reduced cost (falling back to Bland's rule
after a run of degenerate pivots).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .errors import AlignmentError, FlatPlanError, Infeasible, SizeExceeded
from .flatness import MeasureTuple
from .planner import Grid, snap_spacing_exact

try:
    from gmpy2 import mpq as Q
except ImportError:  # pragma: no cover
    Q = Fraction

MAX_VARIABLES = 200_000
MAX_DENOMINATOR = 10**6
DEGENERATE_RUN = 25


def to_fraction(q) -> Fraction:
    return Fraction(int(q.numerator), int(q.denominator))


def snap(x, max_den: int = MAX_DENOMINATOR) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(float(x)).limit_denominator(max_den)


def snap_weights(ws: Sequence, max_den: int = MAX_DENOMINATOR) -> list[Fraction]:
    """Snap each weight, then repair the largest so the total is exactly 1."""
    out = [snap(w, max_den) if w > 0 else Fraction(0) for w in ws]
    if not any(out):
        raise FlatPlanError("histogram has no positive weight")
    k = max(range(len(out)), key=lambda i: out[i])
    out[k] += 1 - sum(out)
    if out[k] < 0:
        raise FlatPlanError("weights cannot be repaired to total mass 1")
    return out


@dataclass(frozen=True)
class ExactGrid:
    h: Fraction
    origins: tuple[Fraction, ...]
    counts: tuple[int, ...]

    @property
    def N(self) -> int:
        return len(self.counts)

    def position(self, k: int, i: int) -> Fraction:
        return self.origins[k] + i * self.h

    def to_grid(self) -> Grid:
        return Grid(float(self.h), tuple(float(o) for o in self.origins), self.counts, True)

    @classmethod
    def from_grid(cls, g: "Grid | ExactGrid") -> "ExactGrid":
        if isinstance(g, ExactGrid):
            return g
        return cls(snap(g.h), tuple(snap(o) for o in g.origins), tuple(g.counts))


def _exact_cdf(l: Fraction, atom: Fraction, parts: list[tuple[Fraction, Fraction]], x: Fraction) -> Fraction:
    """Left-continuous CDF ``mu([l, x))``."""
    if x <= l:
        return Fraction(0)
    total = atom
    for t, w in parts:
        total += w if x >= t else w * (x - l) / (t - l)
    return total


def rational_histograms(t: MeasureTuple, h) -> tuple[ExactGrid, list[list[Fraction]]]:
    """Exact Voronoi-cell histograms of every item on the lattice of spacing ``h``."""
    h = snap(h)
    origins, counts, hists = [], [], []
    for m in t.items:
        l, r = snap(m.l), snap(m.r)
        steps = (r - l) / h
        if steps.denominator != 1:
            raise AlignmentError(f"width {float(r - l)!r} is not a multiple of h={float(h)!r}")
        ws = snap_weights([m.atom] + [w for _, w in m.parts])
        atom, parts = ws[0], [(snap(x), w) for (x, _), w in zip(m.parts, ws[1:])]
        n = int(steps) + 1
        edges = [_exact_cdf(l, atom, parts, l + i * h - h / 2) for i in range(n)] + [Fraction(1)]
        origins.append(l)
        counts.append(n)
        hists.append([b - a for a, b in zip(edges, edges[1:])])
    return ExactGrid(h, tuple(origins), tuple(counts)), hists


def exact_histograms(hists: Sequence[Sequence]) -> list[list[Fraction]]:
    return [snap_weights(list(h)) for h in hists]


def _eliminate(target: dict, items, f) -> None:
    """``target -= f * row`` on sparse dict rows, dropping exact zeros."""
    for c, v in items:
        nv = target.get(c, 0) - f * v
        if nv:
            target[c] = nv
        else:
            target.pop(c, None)


class RationalTableau:
    """Simplex tableau over exact rationals for ``A x = b, x >= 0`` with ``b >= 0``.

    Rows are sparse dicts ``column -> coefficient``.  Columns ``n .. n+m-1``
    are the phase-1 artificials.
    """

    def __init__(self, rows: Sequence[dict[int, object]], rhs: Sequence, n: int):
        self.n = n
        self.m = len(rows)
        self.A = [{j: Q(v) for j, v in r.items() if v} for r in rows]
        self.b = [Q(v) for v in rhs]
        if any(v < 0 for v in self.b):
            raise ValueError("right-hand side must be nonnegative")
        self.rows = [dict(r) for r in self.A]
        for i, r in enumerate(self.rows):
            r[n + i] = Q(1)
        self.rhs = list(self.b)
        self.basis = [n + i for i in range(self.m)]
        self.obj: dict[int, object] = {}
        self.obj_rhs = Q(0)
        self.pivots = 0

    def _pivot(self, i: int, j: int) -> None:
        row = self.rows[i]
        p = row[j]
        if p != 1:
            inv = 1 / p
            for c in row:
                row[c] *= inv
            self.rhs[i] *= inv
        items = list(row.items())
        for k, other in enumerate(self.rows):
            if k != i and j in other:
                f = other[j]
                _eliminate(other, items, f)
                self.rhs[k] -= f * self.rhs[i]
        if j in self.obj:
            f = self.obj[j]
            _eliminate(self.obj, items, f)
            self.obj_rhs -= f * self.rhs[i]
        leaving = self.basis[i]
        self.basis[i] = j
        self.pivots += 1
        if leaving >= self.n:
            # an artificial that left the basis never re-enters
            for r in self.rows:
                r.pop(leaving, None)
            self.obj.pop(leaving, None)

    def _run(self, allowed) -> None:
        degenerate = 0
        while True:
            cands = [(v, c) for c, v in self.obj.items() if v < 0 and allowed(c)]
            if not cands:
                return
            if degenerate >= DEGENERATE_RUN:
                j = min(c for _, c in cands)
            else:
                j = min(cands)[1]
            best, leave = None, None
            for i, row in enumerate(self.rows):
                a = row.get(j)
                if a is not None and a > 0:
                    ratio = self.rhs[i] / a
                    if best is None or ratio < best or (ratio == best and self.basis[i] < self.basis[leave]):
                        best, leave = ratio, i
            if leave is None:
                raise FlatPlanError("unbounded objective")
            degenerate = degenerate + 1 if best == 0 else 0
            self._pivot(leave, j)

    def phase_one(self) -> bool:
        """Drive artificials to zero; returns feasibility."""
        self.obj, self.obj_rhs = {}, Q(0)
        for r, v in zip(self.A, self.b):
            for c, a in r.items():
                self.obj[c] = self.obj.get(c, 0) - a
            self.obj_rhs -= v
        self.obj = {c: v for c, v in self.obj.items() if v}
        self._run(lambda c: c < self.n)
        if self.obj_rhs != 0:
            return False
        keep = []
        for i in range(self.m):
            if self.basis[i] >= self.n:
                j = next((c for c in sorted(self.rows[i]) if c < self.n), None)
                if j is None:
                    continue  # redundant equation
                self._pivot(i, j)
            keep.append(i)
        self.rows = [{c: v for c, v in self.rows[i].items() if c < self.n} for i in keep]
        self.rhs = [self.rhs[i] for i in keep]
        self.basis = [self.basis[i] for i in keep]
        return True

    def phase_two(self, cost: Sequence) -> None:
        self.obj = {j: Q(c) for j, c in enumerate(cost) if c}
        self.obj_rhs = Q(0)
        for i, j in enumerate(self.basis):
            f = self.obj.get(j)
            if f:
                _eliminate(self.obj, list(self.rows[i].items()), f)
                self.obj_rhs -= f * self.rhs[i]
        self._run(lambda c: True)

    def solution(self) -> dict[int, object]:
        return {j: self.rhs[i] for i, j in enumerate(self.basis) if self.rhs[i] != 0}

    def residual_exact(self) -> bool:
        """Re-substitute the basic solution into the original ``A x = b``."""
        x = self.solution()
        if any(v < 0 for v in x.values()):
            return False
        return all(sum((a * x.get(c, 0) for c, a in r.items()), Q(0)) == v
                   for r, v in zip(self.A, self.b))


@dataclass
class OracleResult:
    value: Fraction | None
    feasible: bool
    variables: int
    pivots: int
    exact: bool
    support: list[tuple[tuple[int, ...], Fraction]] = field(default_factory=list)

    def to_json(self) -> dict:
        v = self.value
        return {"value": None if v is None else f"{v.numerator}/{v.denominator}",
                "value_float": None if v is None else float(v),
                "feasible": self.feasible, "variables": self.variables,
                "pivots": self.pivots, "exact": self.exact}


def _support(hists: Sequence[Sequence[Fraction]]) -> list[list[int]]:
    return [[i for i, w in enumerate(h) if w > 0] for h in hists]


def _check_size(n: int) -> None:
    if n > MAX_VARIABLES:
        raise SizeExceeded(f"{n} variables exceed the oracle limit {MAX_VARIABLES}")


def _solve(points: list[tuple[int, ...]], hists: Sequence[Sequence[Fraction]], cost=None) -> OracleResult:
    index = {}
    rhs = []
    for k, h in enumerate(hists):
        for i, w in enumerate(h):
            if w > 0:
                index[(k, i)] = len(rhs)
                rhs.append(w)
    rows = [dict() for _ in rhs]
    for col, idx in enumerate(points):
        for k, i in enumerate(idx):
            rows[index[(k, i)]][col] = 1
    tab = RationalTableau(rows, rhs, len(points))
    if not points or not tab.phase_one():
        return OracleResult(None, False, len(points), tab.pivots, True)
    if cost is not None:
        tab.phase_two(cost)
    x = tab.solution()
    value = to_fraction(sum((Q(cost[j]) * v for j, v in x.items()), Q(0))) if cost is not None else Fraction(0)
    supp = [(points[j], to_fraction(v)) for j, v in sorted(x.items())]
    return OracleResult(value, True, len(points), tab.pivots, tab.residual_exact(), supp)


def min_cost_report(hists, grid, C) -> OracleResult:
    g = ExactGrid.from_grid(grid)
    hs = exact_histograms(hists)
    C = snap(C)
    supp = _support(hs)
    _check_size(math.prod(len(s) for s in supp))
    points = list(itertools.product(*supp))
    cost = [(sum((g.position(k, i) for k, i in enumerate(p)), Fraction(0)) - C) ** 2 for p in points]
    res = _solve(points, hs, cost)
    if not res.feasible:
        raise Infeasible("marginals admit no coupling")
    return res


def oracle_min_cost(hists, grid, C) -> Fraction:
    """Exact minimum of ``sum w * (sum(x) - C)^2`` over all couplings of ``hists``."""
    return min_cost_report(hists, grid, C).value


def slice_points(grid: ExactGrid, support: Sequence[Sequence[int]], C: Fraction) -> list[tuple[int, ...]]:
    """Support index vectors with ``sum(x) == C`` exactly."""
    target = (C - sum(grid.origins, Fraction(0))) / grid.h
    if target.denominator != 1:
        return []
    target = int(target)
    out = []
    lo = [min(s, default=0) for s in support]
    hi = [max(s, default=-1) for s in support]
    tail_lo = list(itertools.accumulate(reversed(lo)))[::-1] + [0]
    tail_hi = list(itertools.accumulate(reversed(hi)))[::-1] + [0]

    def rec(k, prefix, s):
        if k == len(support):
            if s == target:
                out.append(tuple(prefix))
            return
        for i in support[k]:
            rest = target - s - i
            if tail_lo[k + 1] <= rest <= tail_hi[k + 1]:
                prefix.append(i)
                rec(k + 1, prefix, s + i)
                prefix.pop()

    rec(0, [], 0)
    return out


def feasible_report(hists, grid, C) -> OracleResult:
    g = ExactGrid.from_grid(grid)
    hs = exact_histograms(hists)
    supp = _support(hs)
    points = slice_points(g, supp, snap(C))
    _check_size(len(points))
    return _solve(points, hs)


def oracle_feasible_on_slice(hists, grid, C) -> bool:
    """Exact feasibility of the marginal equations restricted to ``sum(x) == C``."""
    return feasible_report(hists, grid, C).feasible


def oracle_tuple(t: MeasureTuple, target_h) -> dict:
    """Exact report for a tuple: snapped ``h``, minimum cost and slice feasibility."""
    h = snap_spacing_exact(t, float(target_h))
    grid, hists = rational_histograms(t, h)
    best = min_cost_report(hists, grid, t.C)
    sl = feasible_report(hists, grid, t.C)
    out = {"h": f"{h.numerator}/{h.denominator}", "h_float": float(h)}
    out.update({"min_cost": best.to_json()["value"], "min_cost_float": best.to_json()["value_float"],
                "feasible_on_slice": sl.feasible, "variables": best.variables,
                "slice_variables": sl.variables, "exact": best.exact and sl.exact})
    return out


__all__ = [
    "RationalTableau", "ExactGrid", "OracleResult", "oracle_min_cost", "oracle_feasible_on_slice",
    "rational_histograms", "min_cost_report", "feasible_report", "oracle_tuple", "slice_points",
]
