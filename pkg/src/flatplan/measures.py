"""One-dimensional measures with nonincreasing density.

A :class:`DecreasingMeasure` on ``[l, r]`` is stored as an atom at ``l`` plus a
finite mixture of normalized uniforms ``lambda[l, t]``.  Any such mixture has a
nonincreasing step density, and every nonincreasing step density (plus an
atom at the left endpoint) has exactly one such representation, which is what
:func:`from_step_density` and :func:`to_step_density` convert between.

``lambda[l, l]`` is the Dirac mass at ``l``; it is always folded into ``atom``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DomainError,
    LeftEndpointMismatch,
    MassError,
    NonincreasingViolation,
)

MASS_TOL = 1e-12
EQ_TOL = 1e-9
# weights at or below this magnitude are treated as rounding noise and dropped
ZERO_WEIGHT = 1e-15


@dataclass(frozen=True)
class Segment:
    l: float
    r: float

    def __post_init__(self):
        if not self.l <= self.r:
            raise DomainError(f"segment needs l <= r, got [{self.l}, {self.r}]")

    @property
    def width(self) -> float:
        return self.r - self.l


@dataclass(frozen=True)
class DecreasingMeasure:
    """``atom * delta(l) + sum(w * lambda[l, t] for t, w in parts)``.

    The raw constructor does not validate anything, so it can be used to build
    deliberately broken measures for :func:`validate_decreasing`.  Use
    :meth:`build` (or :func:`uniform`, :func:`dirac`, :func:`mixture`) for the
    checked, canonical form.
    """

    seg: Segment
    atom: float
    parts: tuple[tuple[float, float], ...] = ()

    @classmethod
    def build(cls, l: float, r: float, atom: float = 0.0,
              parts: Iterable[tuple[float, float]] = ()) -> "DecreasingMeasure":
        seg = Segment(float(l), float(r))
        atom, merged = _canonical_parts(seg, float(atom), parts)
        return cls(seg, atom, merged)

    @property
    def l(self) -> float:
        return self.seg.l

    @property
    def r(self) -> float:
        return self.seg.r

    @property
    def support_right(self) -> float:
        """Right end of the actual support (may be smaller than ``seg.r``)."""
        return self.parts[-1][0] if self.parts else self.seg.l

    @property
    def is_dirac(self) -> bool:
        return not self.parts

    def components(self) -> int:
        return (1 if self.atom > 0 else 0) + len(self.parts)

    def normalized(self) -> "DecreasingMeasure":
        return DecreasingMeasure.build(self.l, self.r, self.atom, self.parts)

    def affine(self, a: float, b: float) -> "DecreasingMeasure":
        """Pushforward under ``x -> a*x + b`` with ``a > 0``."""
        if not a > 0:
            raise DomainError("affine image needs a positive scale")
        return DecreasingMeasure.build(a * self.l + b, a * self.r + b, self.atom,
                                       [(a * t + b, w) for t, w in self.parts])


def _canonical_parts(seg: Segment, atom: float, parts) -> tuple[float, tuple]:
    acc: dict[float, float] = {}
    for t, w in parts:
        t, w = float(t), float(w)
        if t < seg.l:
            raise DomainError(f"part endpoint {t} lies left of l={seg.l}")
        if t > seg.r:
            if t - seg.r > MASS_TOL * max(1.0, abs(seg.r)):
                raise DomainError(f"part endpoint {t} lies right of r={seg.r}")
            t = seg.r
        if t == seg.l:
            atom += w
            continue
        acc[t] = acc.get(t, 0.0) + w
    out = []
    for t in sorted(acc):
        w = acc[t]
        if abs(w) <= ZERO_WEIGHT:
            continue
        if w < 0:
            raise NonincreasingViolation(f"negative mixture weight {w} at t={t}")
        out.append((t, w))
    if abs(atom) <= ZERO_WEIGHT:
        atom = 0.0
    if atom < 0:
        raise NonincreasingViolation(f"negative atom {atom}")
    total = atom + math.fsum(w for _, w in out)
    if abs(total - 1.0) > MASS_TOL:
        raise MassError(f"total mass {total!r} differs from 1")
    return atom, tuple(out)


def uniform(l: float, t: float) -> DecreasingMeasure:
    """``lambda[l, t]``; the Dirac mass when ``t == l``."""
    return DecreasingMeasure.build(l, t, 0.0, [(t, 1.0)])


def dirac(x: float) -> DecreasingMeasure:
    return DecreasingMeasure.build(x, x, 1.0, ())


def mixture(l: float, terms: Sequence[tuple[float, float]], r: float | None = None) -> DecreasingMeasure:
    """``sum(w * lambda[l, t])`` over ``terms = [(w, t), ...]``."""
    if r is None:
        r = max(t for _, t in terms)
    return DecreasingMeasure.build(l, r, 0.0, [(t, w) for w, t in terms])


@dataclass(frozen=True)
class DiscreteMeasure:
    atoms: tuple[tuple[float, float], ...]

    @classmethod
    def build(cls, atoms: Iterable[tuple[float, float]]) -> "DiscreteMeasure":
        acc: dict[float, float] = {}
        for x, w in atoms:
            acc[float(x)] = acc.get(float(x), 0.0) + float(w)
        out = []
        for x in sorted(acc):
            w = acc[x]
            if abs(w) <= ZERO_WEIGHT:
                continue
            if w < 0:
                raise DomainError(f"negative weight {w} at x={x}")
            out.append((x, w))
        total = math.fsum(w for _, w in out)
        if abs(total - 1.0) > MASS_TOL:
            raise MassError(f"total mass {total!r} differs from 1")
        return cls(tuple(out))

    def expectation(self) -> float:
        return math.fsum(x * w for x, w in self.atoms)


@dataclass(frozen=True)
class StepDensity:
    """Density ``values[i]`` on ``[breakpoints[i], breakpoints[i+1])`` plus an atom at the left end."""

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]
    atom: float = 0.0

    def __post_init__(self):
        if len(self.breakpoints) != len(self.values) + 1:
            raise DomainError("need exactly one more breakpoint than density values")
        if any(b <= a for a, b in zip(self.breakpoints, self.breakpoints[1:])):
            raise DomainError("breakpoints must be strictly increasing")

    @property
    def mass(self) -> float:
        xs = self.breakpoints
        return self.atom + math.fsum(d * (b - a) for d, a, b in zip(self.values, xs, xs[1:]))


def from_step_density(sd: StepDensity) -> DecreasingMeasure:
    xs, ds = sd.breakpoints, sd.values
    l = xs[0]
    for i in range(len(ds) - 1):
        if ds[i] < ds[i + 1] - MASS_TOL:
            raise NonincreasingViolation(
                f"density increases on cell {i}: {ds[i]!r} < {ds[i + 1]!r}")
    if ds and ds[-1] < -MASS_TOL:
        raise NonincreasingViolation("negative density")
    if abs(sd.mass - 1.0) > MASS_TOL:
        raise MassError(f"total mass {sd.mass!r} differs from 1")
    parts = []
    for i, d in enumerate(ds):
        nxt = ds[i + 1] if i + 1 < len(ds) else 0.0
        w = max(d - nxt, 0.0) * (xs[i + 1] - l)
        parts.append((xs[i + 1], w))
    return DecreasingMeasure.build(l, xs[-1], sd.atom, parts)


def to_step_density(mu: DecreasingMeasure) -> StepDensity:
    l = mu.l
    if not mu.parts:
        if mu.r == l:
            return StepDensity((l,), (), mu.atom)
        return StepDensity((l, mu.r), (0.0,), mu.atom)
    ts = [t for t, _ in mu.parts]
    tail = np.cumsum([w / (t - l) for t, w in reversed(mu.parts)])[::-1]
    xs = [l] + ts
    vals = [float(v) for v in tail]
    if ts[-1] < mu.r:
        xs.append(mu.r)
        vals.append(0.0)
    return StepDensity(tuple(xs), tuple(vals), mu.atom)


def expectation(mu: DecreasingMeasure) -> float:
    return mu.atom * mu.l + math.fsum(w * (mu.l + t) / 2 for t, w in mu.parts)


def second_moment(mu: DecreasingMeasure) -> float:
    l = mu.l
    return mu.atom * l * l + math.fsum(w * (l * l + l * t + t * t) / 3 for t, w in mu.parts)


def cdf(mu: DecreasingMeasure, x: float) -> float:
    """Left-continuous distribution function ``mu((-inf, x))``."""
    l = mu.l
    if x <= l:
        return 0.0
    return min(1.0, mu.atom + math.fsum(w * min(1.0, (x - l) / (t - l)) for t, w in mu.parts))


def cdf_right(mu: DecreasingMeasure, x: float) -> float:
    """Right limit ``mu((-inf, x])``."""
    if x < mu.l:
        return 0.0
    if x == mu.l:
        return mu.atom
    return cdf(mu, x)


def interval_mass(mu: DecreasingMeasure, a: float, b: float) -> float:
    """``mu([a, b])`` for ``a <= b``."""
    return cdf_right(mu, b) - cdf(mu, a)


def breakpoints(mu: DecreasingMeasure) -> list[float]:
    return sorted({mu.l, mu.r, *(t for t, _ in mu.parts)})


@dataclass
class ValidationReport:
    ok: bool
    check: str | None = None
    probe: tuple[float, ...] | None = None
    detail: str = ""
    probes_used: int = 0
    checks: dict = field(default_factory=dict)


def probe_grid(mu: DecreasingMeasure, n: int = 100) -> np.ndarray:
    l, r = mu.l, mu.r
    if r == l:
        return np.array([l])
    bps = np.array(breakpoints(mu))
    mids = (bps[:-1] + bps[1:]) / 2
    uni = np.linspace(l, r, n + 1)
    pts = np.unique(np.concatenate([bps, mids, uni]))
    return pts[pts > l]


def validate_decreasing(mu: DecreasingMeasure, n: int = 100, tol: float = 1e-10) -> ValidationReport:
    """Check membership of ``mu`` in D[l, r] on a probe grid.

    The grid contains every breakpoint, so for step densities the concavity
    test on consecutive probe triples is exact.  Never raises.
    """
    l, r = mu.l, mu.r
    checks = {}
    f_l = cdf(mu, l)
    f_r = cdf_right(mu, r)
    checks["boundary"] = abs(f_l) <= tol and abs(f_r - 1.0) <= tol
    if not checks["boundary"]:
        return ValidationReport(False, "boundary", (l, r),
                                f"F(l)={f_l!r}, F(r+)={f_r!r}", 0, checks)
    if r == l:
        checks["concavity"] = checks["mass_bound"] = True
        return ValidationReport(True, probes_used=1, checks=checks)
    xs = probe_grid(mu, n)
    fs = np.array([cdf(mu, x) for x in xs])
    for a, b, c, fa, fb, fc in zip(xs, xs[1:], xs[2:], fs, fs[1:], fs[2:]):
        chord = ((c - b) * fa + (b - a) * fc) / (c - a)
        if fb < chord - tol:
            checks["concavity"] = False
            return ValidationReport(False, "concavity", (float(a), float(b), float(c)),
                                    f"F(b)={fb!r} below chord {chord!r}", len(xs), checks)
    checks["concavity"] = True
    # mu([a, b]) <= (b - a) / (a - l) for every probe pair a < b
    masses = fs[None, :] - fs[:, None]
    bound = (xs[None, :] - xs[:, None]) / (xs[:, None] - l)
    bad = np.triu(masses > bound + tol, k=1)
    if bad.any():
        i, j = map(int, np.argwhere(bad)[0])
        checks["mass_bound"] = False
        return ValidationReport(False, "mass_bound", (float(xs[i]), float(xs[j])),
                                f"mass {masses[i, j]!r} > bound {bound[i, j]!r}", len(xs), checks)
    checks["mass_bound"] = True
    return ValidationReport(True, probes_used=len(xs), checks=checks)


def convex_combine(alpha: float, mu1: DecreasingMeasure, mu2: DecreasingMeasure) -> DecreasingMeasure:
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"alpha={alpha} outside [0, 1]")
    if mu1.l != mu2.l:
        raise LeftEndpointMismatch(f"left endpoints differ: {mu1.l} vs {mu2.l}")
    beta = 1.0 - alpha
    r = max([m.r for m, c in ((mu1, alpha), (mu2, beta)) if c > 0] or [mu1.r])
    parts = [(t, c * w) for m, c in ((mu1, alpha), (mu2, beta)) if c > 0 for t, w in m.parts]
    return DecreasingMeasure.build(mu1.l, r, alpha * mu1.atom + beta * mu2.atom, parts)


def tstar(nu: DiscreteMeasure, l: float) -> DecreasingMeasure:
    """Averaging operator: ``delta(t) -> lambda[l, t]``, extended linearly."""
    if nu.atoms and nu.atoms[0][0] < l:
        raise DomainError(f"atom at {nu.atoms[0][0]} lies left of l={l}")
    r = nu.atoms[-1][0] if nu.atoms else l
    return DecreasingMeasure.build(l, r, 0.0, nu.atoms)


def tstar_inverse(mu: DecreasingMeasure) -> DiscreteMeasure:
    atoms = list(mu.parts)
    if mu.atom > 0:
        atoms.insert(0, (mu.l, mu.atom))
    return DiscreteMeasure(tuple(atoms))


def is_extreme_dlre(mu: DecreasingMeasure, e: float) -> bool:
    """Extreme point of D[l, r; e]: right mean and at most two uniform components."""
    return abs(expectation(mu) - e) <= EQ_TOL and mu.components() <= 2


def mixture_cdf_gap(weights: Sequence[float], measures: Sequence[DecreasingMeasure],
                    target: DecreasingMeasure) -> float:
    """Sup-distance between the CDF of ``sum(w_i * m_i)`` and that of ``target``.

    Both sides are piecewise linear with jumps only at left endpoints, so
    comparing left and right limits at every breakpoint is exact.  The
    measures may have different left endpoints.
    """
    pts = sorted({x for m in (*measures, target) for x in breakpoints(m)})
    gap = 0.0
    for x in pts:
        for F in (cdf, cdf_right):
            mixed = math.fsum(w * F(m, x) for w, m in zip(weights, measures))
            gap = max(gap, abs(mixed - F(target, x)))
    return gap
