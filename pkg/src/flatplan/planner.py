"""Discretize a tuple onto an aligned grid and build a coupling on the hyperplane.

The coupling is found by a phase-1 primal simplex (dense float tableau,
Bland's rule) whose variables are the grid points of the slice
``{|x_1 + ... + x_N - C| <= band}``.
"""
from __future__ import annotations

import itertools
import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import AlignmentError, Infeasible, NoAlignment, SliceEmpty
from .flatness import MeasureTuple
from .measures import cdf

log = logging.getLogger(__name__)

ALIGN_TOL = 1e-9
PIVOT_TOL = 1e-9
FEAS_TOL = 1e-9
MAX_DENOMINATOR = 10**6
MIN_SPACING = 1e-6
MAX_AXIS_NODES = 4096


@dataclass(frozen=True)
class Grid:
    """Per-axis nodes ``origins[k] + i*h`` for ``i < counts[k]``."""

    h: float
    origins: tuple[float, ...]
    counts: tuple[int, ...]
    aligned: bool = True

    @property
    def N(self) -> int:
        return len(self.counts)

    @property
    def axes(self) -> list[np.ndarray]:
        return [o + self.h * np.arange(n) for o, n in zip(self.origins, self.counts)]

    def position(self, k: int, i: int) -> float:
        return self.origins[k] + i * self.h

    def to_json(self) -> dict:
        return {"h": self.h, "origins": list(self.origins), "counts": list(self.counts),
                "aligned": self.aligned}


@dataclass(frozen=True)
class Coupling:
    entries: tuple[tuple[tuple[int, ...], float], ...]

    @property
    def mass(self) -> float:
        return math.fsum(w for _, w in self.entries)

    def __len__(self):
        return len(self.entries)


def _is_multiple(x: float, h: float, tol: float = ALIGN_TOL) -> bool:
    return abs(x - round(x / h) * h) <= tol


def grid_points(t: MeasureTuple) -> list[float]:
    """Values that must sit on the lattice: endpoints, C and every mixture breakpoint."""
    pts = [t.C]
    for m in t.items:
        pts += [m.l, m.r] + [x for x, _ in m.parts]
    return pts


def rational(x: float, max_den: int = MAX_DENOMINATOR) -> Fraction:
    q = Fraction(x).limit_denominator(max_den)
    if abs(float(q) - x) > ALIGN_TOL:
        raise NoAlignment(f"{x!r} is not a rational with denominator <= {max_den}")
    return q


def rational_gcd(values: Sequence[Fraction]) -> Fraction | None:
    nz = [abs(v) for v in values if v != 0]
    if not nz:
        return None
    den = math.lcm(*(v.denominator for v in nz))
    num = math.gcd(*(int(v * den) for v in nz))
    return Fraction(num, den)


def snap_spacing_exact(t: MeasureTuple, target_h: float) -> Fraction:
    g = rational_gcd([rational(x) for x in grid_points(t)])
    target = Fraction(target_h)
    if g is None:
        return target
    h = g / math.ceil(g / target)
    if h < MIN_SPACING:
        raise NoAlignment(f"common spacing {float(h)!r} is below {MIN_SPACING}")
    return h


def snap_spacing(t: MeasureTuple, target_h: float) -> float:
    """Largest ``h <= target_h`` dividing every endpoint, breakpoint and C."""
    return float(snap_spacing_exact(t, target_h))


def discretize(t: MeasureTuple, h: float, align: bool = True) -> tuple[Grid, list[np.ndarray]]:
    """Voronoi-cell pushforward of every item onto the grid with spacing ``h``.

    Node ``x_i`` receives the exact mass of ``[x_i - h/2, x_i + h/2)``.  With
    ``align=False`` endpoints need not be multiples of ``h``; the last node of
    each axis is then the first one at or beyond ``r``.
    """
    if not h > 0:
        raise AlignmentError("spacing must be positive")
    if align:
        bad = [x for x in (t.C, *(v for m in t.items for v in (m.l, m.r))) if not _is_multiple(x, h)]
        if bad:
            raise AlignmentError(f"{bad[0]!r} is not a multiple of h={h!r}")
    origins, counts, hists = [], [], []
    for m in t.items:
        steps = (m.r - m.l) / h
        n = int(round(steps)) + 1 if align else int(math.ceil(steps - ALIGN_TOL)) + 1
        xs = m.l + h * np.arange(n)
        edges = [cdf(m, x - h / 2) for x in xs] + [1.0]
        w = np.diff(edges)
        w[w < 0] = 0.0
        origins.append(m.l)
        counts.append(n)
        hists.append(w)
    return Grid(float(h), tuple(origins), tuple(counts), align), hists


def _index_window(grid: Grid, C: float, band: float) -> tuple[int, int]:
    base = (C - math.fsum(grid.origins)) / grid.h
    if grid.aligned and band == 0:
        s = round(base)
        return s, s
    lo = math.ceil(base - (band + FEAS_TOL) / grid.h - ALIGN_TOL)
    hi = math.floor(base + (band + FEAS_TOL) / grid.h + ALIGN_TOL)
    return lo, hi


def enumerate_slice(grid: Grid, C: float, band: float = 0.0,
                    support: Sequence[np.ndarray] | None = None) -> list[tuple[int, ...]]:
    """Index vectors with ``|sum(x) - C| <= band``, in lexicographic order.

    ``support`` optionally restricts each axis to listed node indices.  Partial
    sums of the two halves of the axes are tabulated and matched
    (meet in the middle), so the full product grid is never materialized.
    """
    lo, hi = _index_window(grid, C, band)
    nodes = [np.arange(n) if support is None else np.asarray(support[k])
             for k, n in enumerate(grid.counts)]
    half = grid.N // 2
    left = defaultdict(list)
    for idx in itertools.product(*(map(int, a) for a in nodes[:half])):
        left[sum(idx)].append(idx)
    right = defaultdict(list)
    for idx in itertools.product(*(map(int, a) for a in nodes[half:])):
        right[sum(idx)].append(idx)
    out = []
    for sl, lefts in left.items():
        for s in range(lo - sl, hi - sl + 1):
            rights = right.get(s)
            if rights:
                out.extend(a + b for a in lefts for b in rights)
    out.sort()
    return out


def phase_one(A: np.ndarray, b: np.ndarray, pivot_tol: float = PIVOT_TOL,
              max_iter: int = 200000) -> tuple[np.ndarray, float]:
    """Minimize the artificial mass for ``A x = b, x >= 0`` (``b >= 0``).

    Dense tableau, Bland's rule for both entering and leaving variables.
    Returns ``(x, residual)``; ``residual`` is the optimal artificial mass.
    """
    m, n = A.shape
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :n] = -A.sum(axis=0)
    T[m, -1] = -b.sum()
    basis = list(range(n, n + m))
    for _ in range(max_iter):
        cost = T[m, :n + m]
        entering = np.flatnonzero(cost < -pivot_tol)
        if entering.size == 0:
            break
        j = int(entering[0])
        col = T[:m, j]
        rows = np.flatnonzero(col > pivot_tol)
        if rows.size == 0:
            # unbounded direction cannot occur in phase 1; treat as numerical noise
            T[m, j] = 0.0
            continue
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + pivot_tol * max(1.0, abs(best))]
        i = int(min(ties, key=lambda r: basis[r]))
        T[i] /= T[i, j]
        others = T[:, j].copy()
        others[i] = 0.0
        nz = np.flatnonzero(others)
        T[nz] -= np.outer(others[nz], T[i])
        basis[i] = j
    else:
        raise Infeasible("phase-1 iteration limit reached")
    x = np.zeros(n)
    for i, j in enumerate(basis):
        if j < n:
            x[j] = T[i, -1]
    return x, float(-T[m, -1])


def marginal_system(grid: Grid, hists: Sequence[np.ndarray], points: Sequence[tuple[int, ...]]):
    rows, rhs = {}, []
    for k, h in enumerate(hists):
        for i, w in enumerate(h):
            if w > 0:
                rows[(k, i)] = len(rhs)
                rhs.append(float(w))
    A = np.zeros((len(rhs), len(points)))
    for col, idx in enumerate(points):
        for k, i in enumerate(idx):
            A[rows[(k, i)], col] = 1.0
    return A, np.array(rhs)


def build_flat_plan(grid: Grid, hists: Sequence[np.ndarray], C: float, band: float = 0.0) -> Coupling:
    """Coupling with the given marginals supported on ``|sum(x) - C| <= band``."""
    support = [np.flatnonzero(h > 0) for h in hists]
    points = enumerate_slice(grid, C, band, support)
    if not points:
        raise SliceEmpty(f"no grid point within band {band!r} of the hyperplane")
    A, b = marginal_system(grid, hists, points)
    log.debug("phase 1 on %d rows x %d slice variables", *A.shape)
    x, residual = phase_one(A, b)
    if residual > FEAS_TOL:
        raise Infeasible(f"no coupling on the slice (artificial mass {residual:.3g})")
    x[x < 0] = 0.0
    entries = tuple((points[j], float(x[j])) for j in np.flatnonzero(x > 0))
    return Coupling(entries)


@dataclass
class CouplingReport:
    max_marginal_deviation: float
    max_hyperplane_deviation: float
    mass: float
    within_band: bool

    def to_json(self) -> dict:
        return dict(self.__dict__)


def coupling_marginals(c: Coupling, grid: Grid) -> list[np.ndarray]:
    margs = [np.zeros(n) for n in grid.counts]
    for idx, w in c.entries:
        for k, i in enumerate(idx):
            margs[k][i] += w
    return margs


def hyperplane_offset(grid: Grid, idx: Sequence[int], C: float) -> float:
    """``sum(x) - C`` at a grid point; exactly zero on the slice of an aligned grid."""
    if grid.aligned:
        base = (C - math.fsum(grid.origins)) / grid.h
        s = round(base)
        if abs(base - s) <= ALIGN_TOL:
            return grid.h * (sum(idx) - s)
    return math.fsum(grid.position(k, i) for k, i in enumerate(idx)) - C


def verify_coupling(c: Coupling, grid: Grid, hists: Sequence[np.ndarray], C: float,
                    band: float = 0.0) -> CouplingReport:
    margs = coupling_marginals(c, grid)
    dev = max(float(np.max(np.abs(m - h), initial=0.0)) for m, h in zip(margs, hists))
    off = max((abs(hyperplane_offset(grid, idx, C)) for idx, _ in c.entries), default=0.0)
    return CouplingReport(dev, off, c.mass, off <= band + FEAS_TOL)


@dataclass
class CostReport:
    pairwise: float
    squared_sum: float
    centered: float | None
    identity_residual: float

    def to_json(self) -> dict:
        return dict(self.__dict__)


def cost_from_points(points: Sequence[Sequence[float]], weights: Sequence[float],
                     C: float | None = None, offsets: Sequence[float] | None = None) -> CostReport:
    """Cost report for a discrete plan given by support points and weights.

    ``offsets`` optionally supplies exact ``sum(x) - C`` values per point.
    """
    X = np.asarray(points, dtype=float).reshape(len(weights), -1)
    w = np.asarray(weights, dtype=float)
    N = X.shape[1]
    diff = X[:, :, None] - X[:, None, :]
    pairwise = -math.fsum(w * np.sum(diff * diff, axis=(1, 2)))
    sums = X.sum(axis=1)
    squared = math.fsum(w * sums * sums)
    second = math.fsum(w @ (X * X))
    residual = abs(pairwise - (2 * squared - 2 * N * second))
    centered = None
    if C is not None:
        off = sums - C if offsets is None else np.asarray(offsets, dtype=float)
        centered = math.fsum(w * off * off)
    return CostReport(pairwise, squared, centered, residual)


def harmonic_cost(c: Coupling, grid: Grid, C: float | None = None) -> CostReport:
    """Repulsive harmonic cost and ``E[(sum x)^2]`` of a coupling.

    ``identity_residual`` measures
    ``pairwise - (2*squared_sum - 2N * sum_k E[x_k^2])`` with the second
    moments taken from the coupling's own marginals; it is pure rounding error.
    """
    pts = [[grid.position(k, i) for k, i in enumerate(idx)] for idx, _ in c.entries]
    ws = [w for _, w in c.entries]
    offs = None if C is None else [hyperplane_offset(grid, idx, C) for idx, _ in c.entries]
    return cost_from_points(pts, ws, C, offs)


def plan(t: MeasureTuple, target_h: float, band: float | None = None):
    """Snap, discretize and solve; returns ``(grid, hists, coupling, band_used)``.

    When the tuple cannot be aligned (or alignment would need more than
    ``MAX_AXIS_NODES`` nodes per axis) the grid uses ``target_h`` directly and
    the band defaults to ``N*h/2``.
    """
    try:
        h = snap_spacing(t, target_h)
        widest = max(m.r - m.l for m in t.items)
        if widest / h + 1 > MAX_AXIS_NODES:
            raise NoAlignment(f"aligned spacing {h!r} needs more than {MAX_AXIS_NODES} nodes per axis")
        grid, hists = discretize(t, h)
        default_band = 0.0
    except (NoAlignment, AlignmentError) as exc:
        log.warning("alignment failed (%s); using band N*h/2", exc)
        h = target_h
        grid, hists = discretize(t, h, align=False)
        default_band = t.N * h / 2
    used = default_band if band is None else band
    return grid, hists, build_flat_plan(grid, hists, t.C, used), used
