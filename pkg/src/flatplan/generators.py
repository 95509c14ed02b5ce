"""Seeded random instances for self-tests and property suites."""
from __future__ import annotations

import math
import random
from fractions import Fraction

from .flatness import MeasureTuple, check_flat_criterion, in_vnc
from .measures import DecreasingMeasure, DiscreteMeasure, mixture, uniform


def random_step_item(rng: random.Random, l: float, width: float, lattice: float | None = None) -> DecreasingMeasure:
    """``alpha*lambda[l, p] + (1-alpha)*lambda[l, l+width]`` (or a uniform when ``p`` lands on ``r``)."""
    r = l + width
    if width == 0:
        return uniform(l, l)
    if lattice is None:
        p = l + width * rng.choice([0.0, rng.random(), 1.0])
        alpha = rng.random()
    else:
        # quarter weights need p - l and r - l on the doubled lattice so the
        # mean stays a multiple of lattice/4
        even = math.isclose(width / (2 * lattice), round(width / (2 * lattice)))
        alpha = rng.choice([0.25, 0.5, 0.75]) if even else 0.5
        step = lattice if alpha == 0.5 else 2 * lattice
        p = l + step * rng.randint(0, int(width // step))
    if p >= r or alpha == 0:
        return uniform(l, r)
    if p == l:
        return DecreasingMeasure.build(l, r, alpha, [(r, 1 - alpha)])
    return mixture(l, [(alpha, p), (1 - alpha, r)])


def random_step_tuple(rng: random.Random, N: int, max_tries: int = 1000,
                      atoms: bool = False) -> MeasureTuple:
    """A random step C-compatible tuple (rejection sampling on the boundary).

    For ``N == 2`` compatibility forces two uniforms of equal width (or two
    Diracs), so those are built directly.
    """
    if N == 2:
        w = 0.0 if rng.random() < 0.1 else rng.uniform(0.05, 1.0)
        return MeasureTuple.of([uniform(l, l + w) for l in (rng.uniform(-1, 1), rng.uniform(-1, 1))])
    for _ in range(max_tries):
        items = []
        for _ in range(N):
            l = rng.uniform(-1, 1)
            w = 0.0 if rng.random() < 0.1 else rng.uniform(0.05, 1.0)
            m = random_step_item(rng, l, w)
            if m.atom > 0 and not atoms and not m.is_dirac:
                m = uniform(l, l + w)
            items.append(m)
        t = MeasureTuple.of(items)
        if in_vnc(t, tol=1e-12):
            return t
    raise RuntimeError("no compatible tuple found")


def beta_step_tuple(rng: random.Random, N: int) -> MeasureTuple:
    """Step tuple with one two-part item and a uniform partner, both of width
    ``C - sum(l)``; the remaining uniforms absorb ``alpha * (W - (p - l))``."""
    if N < 3:
        raise ValueError("needs N >= 3")
    W = rng.uniform(0.2, 1.0)
    alpha = rng.uniform(0.05, 0.95)
    pw = W * rng.uniform(0.05, 0.95)
    ls = [rng.uniform(-1, 1) for _ in range(N)]
    cuts = sorted(rng.random() for _ in range(N - 3))
    shares = [b - a for a, b in zip([0.0] + cuts, cuts + [1.0])]
    rest = alpha * (W - pw)
    items = [mixture(ls[0], [(alpha, ls[0] + pw), (1 - alpha, ls[0] + W)]), uniform(ls[1], ls[1] + W)]
    items += [uniform(l, l + rest * f) for l, f in zip(ls[2:], shares)]
    order = list(range(N))
    rng.shuffle(order)
    return MeasureTuple.of([items[k] for k in order])


def lattice_step_tuple(rng: random.Random, N: int, flat: bool, margin: float = 0.05,
                       lattice: float = 0.125, max_width: float = 1.0,
                       max_tries: int = 10000) -> MeasureTuple:
    """Step tuple with endpoints on ``lattice`` whose criterion slack is at least
    ``margin`` (``flat=True``) or at most ``-margin`` (``flat=False``)."""
    cells = round(max_width / lattice)
    for _ in range(max_tries):
        items = []
        for _ in range(N):
            l = lattice * rng.randint(-4, 4)
            w = lattice * rng.randint(1, cells)
            items.append(random_step_item(rng, l, w, lattice))
        t = MeasureTuple.of(items)
        slack = min(check_flat_criterion(t).slacks)
        if (flat and slack >= margin) or (not flat and slack <= -margin):
            return t
    raise RuntimeError("no tuple with the requested margin found")


def random_discrete(rng: random.Random, max_atoms: int = 6) -> DiscreteMeasure:
    n = rng.randint(1, max_atoms)
    ws = [rng.random() + 1e-3 for _ in range(n)]
    s = math.fsum(ws)
    return DiscreteMeasure.build((rng.uniform(-2, 2), w / s) for w in ws)


def random_histograms(rng: random.Random, N: int, max_nodes: int = 9,
                      denominator: int = 64) -> list[list[Fraction]]:
    """Exact random histograms with occasional zero cells."""
    hists = []
    for _ in range(N):
        n = rng.randint(1, max_nodes)
        raw = [0 if rng.random() < 0.2 else rng.randint(1, 8) for _ in range(n)]
        if not any(raw):
            raw[rng.randrange(n)] = 1
        total = sum(raw)
        hists.append([Fraction(v, total) for v in raw])
    return hists


__all__ = ["random_step_item", "random_step_tuple", "beta_step_tuple", "lattice_step_tuple", "random_discrete",
           "random_histograms"]
