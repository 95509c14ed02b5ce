"""Randomized invariant suites behind ``flatplan selftest``."""
from __future__ import annotations

import math
import random
from fractions import Fraction

import numpy as np

from .errors import Infeasible, InvalidCertificate
from .generators import beta_step_tuple, random_discrete, random_histograms, random_step_tuple
from .measures import expectation, tstar, tstar_inverse
from .oracle import ExactGrid, oracle_feasible_on_slice
from .planner import build_flat_plan, harmonic_cost
from .splits import REJECTIONS, candidate_splits, classify_subextreme, verify_split


def suite_splits(rng: random.Random, count: int) -> dict:
    failures, applied = [], 0
    for n in range(count):
        t = beta_step_tuple(rng, rng.randint(3, 4)) if n % 5 == 4 else random_step_tuple(rng, rng.randint(2, 4))
        try:
            classify_subextreme(t)
        except Exception as exc:  # any failure here is a finding
            failures.append(f"case {n}: classify raised {type(exc).__name__}: {exc}")
        for kind, attempt in candidate_splits(t):
            try:
                res = attempt()
            except REJECTIONS:
                continue
            except InvalidCertificate as exc:
                failures.append(f"case {n}: {exc}")
                continue
            applied += 1
            problems = verify_split(t, res)
            if problems:
                failures.append(f"case {n} {kind}: " + "; ".join(problems))
    return {"name": "splits", "cases": count, "applied": applied, "failures": len(failures),
            "details": failures[:10]}


def suite_tstar(rng: random.Random, count: int) -> dict:
    failures = []
    for n in range(count):
        nu = random_discrete(rng)
        l = nu.atoms[0][0] - rng.random()
        mu = tstar(nu, l)
        if abs(expectation(mu) - (l + nu.expectation()) / 2) > 1e-12:
            failures.append(f"case {n}: mean identity")
        if tstar(tstar_inverse(mu), mu.l) != mu:
            failures.append(f"case {n}: round trip")
    return {"name": "tstar", "cases": count, "failures": len(failures), "details": failures[:10]}


def random_agreement_instance(rng: random.Random, feasible: bool):
    """Histograms on a uniform grid plus a hyperplane level.

    ``feasible=True`` pushes a random slice coupling forward, so the slice
    problem is feasible by construction; otherwise histograms are independent.
    """
    N = rng.randint(2, 3)
    h = rng.choice([0.25, 0.5, 1.0])
    origins = tuple(h * rng.randint(-4, 4) for _ in range(N))
    if feasible:
        counts = [rng.randint(1, 9) for _ in range(N)]
        first = tuple(rng.randrange(c) for c in counts)
        s = sum(first)
        mass = [[0] * c for c in counts]
        points = [first] + [_random_slice_point(rng, counts, s) for _ in range(rng.randint(0, 5))]
        for idx in filter(None, points):
            w = rng.randint(1, 5)
            for k, i in enumerate(idx):
                mass[k][i] += w
        hists = [[Fraction(v, sum(row)) for v in row] for row in mass]
    else:
        hists = random_histograms(rng, N)
        counts = [len(x) for x in hists]
        s = rng.randint(0, sum(c - 1 for c in counts))
    grid = ExactGrid(Fraction(h), tuple(Fraction(o) for o in origins), tuple(counts))
    C = sum(origins) + h * s
    return grid, hists, C


def _random_slice_point(rng: random.Random, counts, s):
    for _ in range(100):
        idx = [rng.randrange(c) for c in counts[:-1]]
        last = s - sum(idx)
        if 0 <= last < counts[-1]:
            return (*idx, last)
    return None


def agreement_case(grid: ExactGrid, hists, C: float) -> dict:
    """Planner band-0 verdict against the exact slice verdict for one instance."""
    g = grid.to_grid()
    fh = [np.array([float(w) for w in h]) for h in hists]
    try:
        c = build_flat_plan(g, fh, C, 0.0)
        planner_ok, cost = True, harmonic_cost(c, g, C).centered
    except Infeasible:
        planner_ok, cost = False, None
    oracle_ok = oracle_feasible_on_slice(hists, grid, C)
    return {"planner": planner_ok, "oracle": oracle_ok, "planner_cost": cost}


def suite_agreement(rng: random.Random, count: int) -> dict:
    failures = []
    for n in range(count):
        grid, hists, C = random_agreement_instance(rng, n % 2 == 0)
        r = agreement_case(grid, hists, C)
        if r["planner"] != r["oracle"] or (r["planner"] and r["planner_cost"] != 0):
            failures.append(f"case {n}: {r}")
    return {"name": "agreement", "cases": count, "failures": len(failures), "details": failures[:10]}


def run_selftest(seed: int = 42, count: int = 200) -> dict:
    rng = random.Random(seed)
    suites = [suite_splits(rng, count), suite_tstar(rng, count),
              suite_agreement(rng, max(1, math.ceil(count / 4)))]
    return {"seed": seed, "suites": suites}
