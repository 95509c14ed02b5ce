"""Explicit convex splits of tuples in V^N[C].

Every split returns a :class:`SplitResult` certificate ``mu = alpha*a + (1-alpha)*b``
with ``a != b`` and both halves in V^N[C].  Certificates are verified before
they are returned; a failing certificate raises :class:`InvalidCertificate`.

Indices are 0-based.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Sequence

from .errors import (
    FlatPlanError,
    HypothesisViolated,
    InvalidCertificate,
    NotInVNC,
    NumericalDegenerate,
    PreconditionFailed,
    RejectNotStepForm,
)
from .flatness import (
    CRITERION_TOL,
    IDENTITY_TOL,
    Boundary,
    MeasureTuple,
    StepItem,
    StepTupleView,
    as_step_tuple,
    compatibility_slacks,
    in_vnc,
)
from .measures import (
    DecreasingMeasure,
    StepDensity,
    dirac,
    expectation,
    from_step_density,
    mixture_cdf_gap,
    to_step_density,
    uniform,
)

RECOMBINATION_TOL = 1e-12
MEMBERSHIP_TOL = 1e-9
MIN_WINDOW = 1e-10

KINDS = ("midpoint", "exchange", "peel", "beta", "moment")


@dataclass
class SplitResult:
    alpha: float
    a: MeasureTuple
    b: MeasureTuple
    kind: str
    info: dict = field(default_factory=dict)


@dataclass(frozen=True)
class XiTuple:
    xi: tuple[float, ...]


def recombination_gap(source: MeasureTuple, res: SplitResult) -> float:
    return max(mixture_cdf_gap([res.alpha, 1.0 - res.alpha], [x, y], m)
               for x, y, m in zip(res.a.items, res.b.items, source.items))


def verify_split(source: MeasureTuple, res: SplitResult, C: float | None = None) -> list[str]:
    """Return the list of violated certificate properties (empty when valid)."""
    C = source.C if C is None else C
    problems = []
    if not 0.0 < res.alpha < 1.0:
        problems.append(f"alpha={res.alpha!r} not in (0, 1)")
    gap = recombination_gap(source, res)
    if gap > RECOMBINATION_TOL:
        problems.append(f"recombination gap {gap:.3g}")
    if res.a.items == res.b.items:
        problems.append("halves coincide")
    for name, half in (("a", res.a), ("b", res.b)):
        if not in_vnc(half, C, MEMBERSHIP_TOL):
            problems.append(f"half {name} not in V^N[C]")
    return problems


def _certify(source: MeasureTuple, res: SplitResult, C: float) -> SplitResult:
    problems = verify_split(source, res, C)
    if problems:
        raise InvalidCertificate(f"{res.kind} split failed: " + "; ".join(problems))
    return res


def _view_tuple(v: StepTupleView) -> MeasureTuple:
    return MeasureTuple.of([it.measure() for it in v.items])


def _close(x: float, y: float, tol: float = IDENTITY_TOL) -> bool:
    return abs(x - y) <= tol


# -- midpoint ---------------------------------------------------------------

def split_midpoint(v: StepTupleView, m: int, C: float) -> SplitResult:
    """Halve every uniform item at its midpoint, swapping halves at index ``m``."""
    items = v.items
    if not all(it.is_uniform for it in items):
        raise PreconditionFailed("midpoint split needs every item to be lambda[l_k, r_k]")
    w = v.widths
    if not w[m] > 0:
        raise PreconditionFailed(f"item {m} is a Dirac mass (l_m = r_m)")
    if not _close(math.fsum(v.r), C + w[m]):
        raise PreconditionFailed("sum(r) != C + (r_m - l_m)")
    if not _close(w[m], math.fsum(w) - w[m]):
        raise PreconditionFailed("r_m - l_m != sum of the other widths")
    mids = [(it.l + it.r) / 2 for it in items]
    a, b = [], []
    for k, it in enumerate(items):
        if k == m:
            a.append(uniform(it.l, mids[k]))
            b.append(uniform(mids[k], it.r))
        else:
            a.append(uniform(mids[k], it.r))
            b.append(uniform(it.l, mids[k]))
    res = SplitResult(0.5, MeasureTuple.of(a), MeasureTuple.of(b), "midpoint", {"m": m})
    return _certify(_view_tuple(v), res, C)


# -- exchange ---------------------------------------------------------------

def split_exchange(v: StepTupleView, i: int, j: int) -> SplitResult:
    """Shift mixture weight between two two-part items, keeping the mean sum."""
    if i == j:
        raise PreconditionFailed("exchange needs two distinct indices")
    si, sj = v.items[i], v.items[j]
    if not (si.two_part and sj.two_part):
        raise PreconditionFailed("exchange needs p < r at both indices")
    ai, ri = si.alpha, si.weight_r
    aj, rj = sj.alpha, sj.weight_r
    t = 0.5 * min(min(aj, rj) / (si.r - si.p), min(ai, ri) / (sj.r - sj.p))
    eps_i = t * (si.r - si.p)
    eps_j = t * (sj.r - sj.p)

    def shifted(sign: int) -> MeasureTuple:
        out = []
        for k, it in enumerate(v.items):
            if k == i:
                it = StepItem(it.l, it.p, it.r, ai - sign * eps_j, ri + sign * eps_j)
            elif k == j:
                it = StepItem(it.l, it.p, it.r, aj + sign * eps_i, rj - sign * eps_i)
            out.append(it.measure())
        return MeasureTuple.of(out)

    res = SplitResult(0.5, shifted(+1), shifted(-1), "exchange",
                      {"i": i, "j": j, "t": t, "eps_i": eps_i, "eps_j": eps_j})
    return _certify(_view_tuple(v), res, v.C)


# -- peel ---------------------------------------------------------------------

def make_xi(b: Boundary, C: float) -> XiTuple:
    """Weights ``xi_1..xi_{N-1}`` for the peel construction.

    The last boundary entry is the peeled index; only its left end is used.
    """
    n = len(b.l) - 1
    ls, rs = b.l[:n], b.r[:n]
    l_last = b.l[n]
    room = C - math.fsum(b.l)
    w = [r - l for l, r in zip(ls, rs)]
    for k in range(n):
        if not w[k] < room - CRITERION_TOL:
            raise HypothesisViolated(f"width {w[k]!r} of item {k} is not < C - sum(l) = {room!r}")
    upper = math.fsum(rs) + l_last
    lower = math.fsum((l + r) / 2 for l, r in zip(ls, rs)) + l_last
    if not upper > C + CRITERION_TOL:
        raise HypothesisViolated(f"need sum(r_k, k<N) + l_N = {upper!r} > C = {C!r}")
    if not C > lower + CRITERION_TOL:
        raise HypothesisViolated(f"need C = {C!r} > sum of midpoints + l_N = {lower!r}")
    total = math.fsum(w)
    heavy = [k for k in range(n) if 2 * w[k] > total + CRITERION_TOL]
    xi = [float(x) for x in w]
    if heavy:
        m = heavy[0]
        xi[m] = math.fsum(w[:m] + w[m + 1:])
    _check_xi(xi, w, rs, l_last, C)
    return XiTuple(tuple(xi))


def _check_xi(xi, w, rs, l_last, C) -> None:
    s = math.fsum(xi)
    for k, (x, wk) in enumerate(zip(xi, w)):
        if not -CRITERION_TOL <= x <= wk + CRITERION_TOL:
            raise HypothesisViolated(f"xi_{k} = {x!r} outside [0, {wk!r}]")
        if wk > 0 and not x > 0:
            raise HypothesisViolated(f"xi_{k} must be positive on a nondegenerate segment")
        if 2 * x > s + CRITERION_TOL:
            raise HypothesisViolated(f"2*xi_{k} exceeds the xi sum")
    if not math.fsum(rs) + l_last < C + s / 2:
        raise HypothesisViolated("sum(r) + l_N < C + sum(xi)/2 fails")


@dataclass
class PeelPlan:
    """Parameters of a peel split: the reordered indices and the xi path."""

    m: int
    others: list[int]
    xi0: tuple[float, ...]
    gap: float          # 2 * (sum of other r + l_m - C)
    eps: float          # admissible window [0, eps]

    def xi(self, t: float) -> list[float]:
        s0 = math.fsum(self.xi0)
        return [x * (self.gap + t) / s0 for x in self.xi0]

    def first_half(self, v: StepTupleView, t: float) -> list[DecreasingMeasure]:
        items = [None] * v.N
        for k, x in zip(self.others, self.xi(t)):
            r = v.items[k].r
            items[k] = uniform(max(r - x, v.items[k].l), r)
        lm = v.items[self.m].l
        items[self.m] = uniform(lm, lm + t) if t > 0 else dirac(lm)
        return items


def peel_hypotheses(v: StepTupleView, m: int, C: float) -> str | None:
    """Reason the peel split is not applicable at index ``m`` (None when it is)."""
    slacks = compatibility_slacks(v.boundary(), C)
    for k, s in enumerate(slacks):
        if k != m and not s > CRITERION_TOL:
            return f"item {k} is not strictly inside the compatible boundary"
    w = v.widths
    mean_sum = math.fsum((it.l + it.r) / 2 for it in v.items)
    if not C > mean_sum - w[m] / 2 + CRITERION_TOL:
        return "C <= sum of midpoints - (r_m - l_m)/2"
    if not math.fsum(v.r) - w[m] > C + CRITERION_TOL:
        return "sum(r) = C + (r_m - l_m); the midpoint split applies instead"
    return None


def peel_plan(v: StepTupleView, m: int, C: float) -> PeelPlan:
    why = peel_hypotheses(v, m, C)
    if why:
        raise HypothesisViolated(why)
    others = [k for k in range(v.N) if k != m]
    b = Boundary(tuple(v.items[k].l for k in others) + (v.items[m].l,),
                 tuple(v.items[k].r for k in others) + (v.items[m].r,))
    xi0 = make_xi(b, C).xi
    gap = 2 * (math.fsum(v.items[k].r for k in others) + v.items[m].l - C)
    s0 = math.fsum(xi0)
    eps1 = s0 - gap
    eps2 = max(x * gap / s0 for x in xi0)
    return PeelPlan(m, others, xi0, gap, min(eps1, eps2))


def _residual(mu: DecreasingMeasure, alpha: float, piece_l: float, piece_r: float) -> DecreasingMeasure:
    """``(mu - alpha * lambda[piece_l, piece_r]) / (1 - alpha)``, trimmed to its support."""
    scale = 1.0 - alpha
    if piece_l == piece_r:
        if piece_l != mu.l:
            raise FlatPlanError("a Dirac piece can only be removed at the left endpoint")
        return DecreasingMeasure.build(mu.l, mu.r, (mu.atom - alpha) / scale,
                                       [(t, w / scale) for t, w in mu.parts])
    sd = to_step_density(mu)
    xs = sorted(set(sd.breakpoints) | {piece_l, piece_r})
    height = alpha / (piece_r - piece_l)
    dens = []
    for a, b in zip(xs, xs[1:]):
        i = bisect.bisect_right(sd.breakpoints, a) - 1
        d = sd.values[i] if i < len(sd.values) else 0.0
        if piece_l <= a and b <= piece_r:
            d -= height
        dens.append(d / scale)
    atom = mu.atom / scale
    top = max(abs(d) for d in dens)
    tiny = 1e-12 * max(top, 1.0)
    lo, hi = 0, len(dens)
    if atom == 0.0:
        while lo < hi and dens[lo] <= tiny:
            lo += 1
    while hi > lo and dens[hi - 1] <= tiny:
        hi -= 1
    if lo == hi:
        return DecreasingMeasure.build(xs[lo], xs[lo], atom, ())
    vals = [max(d, 0.0) for d in dens[lo:hi]]
    return from_step_density(StepDensity(tuple(xs[lo:hi + 1]), tuple(vals), atom))


def _peel_order(v: StepTupleView) -> list[int]:
    # widest first; among equal widths the non-uniform item is cut
    return sorted(range(v.N), key=lambda k: (-v.widths[k], v.items[k].is_uniform, k))


def split_peel(t: MeasureTuple, m: int | None = None) -> SplitResult:
    """Peel a uniform sliver off every item (cut-from-the-right construction).

    ``m`` is the index whose left end is cut; when omitted the admissible index
    of largest width is used.
    """
    try:
        v = as_step_tuple(t, allow_atoms=True)
    except RejectNotStepForm as exc:
        raise HypothesisViolated(str(exc)) from exc
    C = t.C
    if m is None:
        order = _peel_order(v)
        m = next((k for k in order if peel_hypotheses(v, k, C) is None), None)
        if m is None:
            raise HypothesisViolated("no index satisfies the peel hypotheses")
    plan = peel_plan(v, m, C)
    if plan.eps < MIN_WINDOW:
        raise NumericalDegenerate(f"admissible window {plan.eps:.3g} underflows")

    A = math.inf
    xi_zero = plan.xi(0.0)
    for k, x in zip(plan.others, xi_zero):
        it = v.items[k]
        ratio = x / it.width if it.width > 0 else 1.0
        A = min(A, it.weight_r * ratio)

    sm = v.items[m]
    if sm.p == sm.l:
        case = 1
        t0 = 0.0
        alpha0 = min(sm.alpha, A)
    else:
        case = 2
        d1 = sm.alpha / (sm.p - sm.l) + sm.weight_r / (sm.r - sm.l)
        room = C - math.fsum(v.l)
        eps_boundary = min([sm.width] + [room - v.widths[k] for k in plan.others])
        window = min(sm.p - sm.l, plan.eps, eps_boundary, A / d1)
        if window < MIN_WINDOW:
            raise NumericalDegenerate(f"peel window {window:.3g} underflows")
        t0 = window / 2
        # use the width the piece really has in floats so its height equals d1
        alpha0 = d1 * ((sm.l + t0) - sm.l)
    if not 0.0 < alpha0 < 1.0:
        raise NumericalDegenerate(f"peel weight {alpha0!r} outside (0, 1)")

    first = plan.first_half(v, t0)
    second = []
    for k, (mu, piece) in enumerate(zip(t.items, first)):
        second.append(_residual(mu, alpha0, piece.l, piece.support_right))
    res = SplitResult(alpha0, MeasureTuple.of(first), MeasureTuple.of(second), "peel",
                      {"m": m, "case": case, "t0": t0, "A": A, "eps": plan.eps,
                       "xi0": list(plan.xi0)})
    return _certify(t, res, C)


# -- beta ---------------------------------------------------------------------

def split_beta(v: StepTupleView, C: float, m: int | None = None, j: int | None = None) -> SplitResult:
    """Rewrite the two-part item ``m`` in the ``lambda[l,p] / lambda[p,r]`` basis.

    ``j`` is a uniform partner whose width equals ``C - sum(l)``, as does the
    width of ``m``.
    """
    room = C - math.fsum(v.l)
    two = [k for k, it in enumerate(v.items) if it.two_part]
    if m is None:
        if len(two) != 1:
            raise PreconditionFailed("beta split needs exactly one two-part item")
        m = two[0]
    if any(k != m for k in two):
        raise PreconditionFailed("items other than m must be uniform")
    sm = v.items[m]
    if not sm.p < sm.r:
        raise PreconditionFailed("beta split needs p_m < r_m")
    if not _close(sm.width, room):
        raise PreconditionFailed("r_m - l_m != C - sum(l)")
    if j is None:
        j = next((k for k in range(v.N) if k != m and _close(v.widths[k], room)), None)
        if j is None:
            raise PreconditionFailed("no partner item with r_j - l_j = C - sum(l)")
    if j == m or not _close(v.widths[j], room):
        raise PreconditionFailed("partner width != C - sum(l)")
    sj = v.items[j]
    beta = sm.alpha + sm.weight_r * (sm.p - sm.l) / (sm.r - sm.l)
    cut = sj.r - beta * sj.width
    a, b = [], []
    for k, it in enumerate(v.items):
        if k == m:
            a.append(uniform(it.l, it.p))
            b.append(uniform(it.p, it.r))
        elif k == j:
            a.append(uniform(cut, it.r))
            b.append(uniform(it.l, cut))
        else:
            a.append(it.measure())
            b.append(it.measure())
    res = SplitResult(beta, MeasureTuple.of(a), MeasureTuple.of(b), "beta", {"m": m, "j": j})
    return _certify(_view_tuple(v), res, C)


# -- moment (non-step items) ------------------------------------------------

def split_moment(t: MeasureTuple, k: int | None = None) -> SplitResult:
    """Split an item with three or more uniform components along a mean-preserving direction.

    Such an item is not extreme in D[l, r; e]; perturbing three component
    weights in the null space of (mass, mean) keeps the expectation and the
    support, so both halves stay in V^N[C].
    """
    idx = [i for i, m in enumerate(t.items) if m.components() >= 3] if k is None else [k]
    if not idx or t.items[idx[0]].components() < 3:
        raise PreconditionFailed("moment split needs an item with at least 3 components")
    k = idx[0]
    mu = t.items[k]
    comps = ([(mu.l, mu.atom)] if mu.atom > 0 else []) + list(mu.parts)
    (t1, w1), (t2, w2), (t3, w3) = comps[:3]
    m1, m2, m3 = ((mu.l + x) / 2 for x in (t1, t2, t3))
    # cross product of (1, 1, 1) and (m1, m2, m3)
    d = (m3 - m2, m1 - m3, m2 - m1)
    s = 0.5 * min(w / abs(di) for w, di in zip((w1, w2, w3), d))

    def moved(sign: int) -> DecreasingMeasure:
        new = [(x, w + sign * s * di) for (x, w), di in zip(comps[:3], d)] + comps[3:]
        return DecreasingMeasure.build(mu.l, mu.r, 0.0, new)

    a = list(t.items)
    b = list(t.items)
    a[k], b[k] = moved(+1), moved(-1)
    res = SplitResult(0.5, MeasureTuple.of(a), MeasureTuple.of(b), "moment", {"k": k})
    return _certify(t, res, t.C)


# -- classification ---------------------------------------------------------

@dataclass
class SubextremeVerdict:
    subextreme: bool
    kind: str | None = None
    split: SplitResult | None = None


def candidate_splits(t: MeasureTuple):
    """Yield ``(kind, thunk)`` for every split whose shape matches ``t``."""
    try:
        v = as_step_tuple(t, allow_atoms=True)
    except RejectNotStepForm:
        yield "moment", lambda: split_moment(t)
        return
    C = t.C
    two = [k for k, it in enumerate(v.items) if it.two_part]
    for a_ in range(len(two)):
        for b_ in range(a_ + 1, len(two)):
            yield "exchange", (lambda i=two[a_], j=two[b_]: split_exchange(v, i, j))
    for m in range(v.N):
        yield "midpoint", (lambda m=m: split_midpoint(v, m, C))
    for m in _peel_order(v):
        yield "peel", (lambda m=m: split_peel(t, m))
    for m in two:
        for j in range(v.N):
            if j != m:
                yield "beta", (lambda m=m, j=j: split_beta(v, C, m, j))


REJECTIONS = (PreconditionFailed, HypothesisViolated, NumericalDegenerate)


def classify_subextreme(t: MeasureTuple) -> SubextremeVerdict:
    if not in_vnc(t, t.C, MEMBERSHIP_TOL):
        raise NotInVNC("tuple is not in V^N[C]")
    if all(m.is_dirac for m in t.items) and abs(math.fsum(m.l for m in t.items) - t.C) <= IDENTITY_TOL:
        return SubextremeVerdict(True)
    for kind, attempt in candidate_splits(t):
        try:
            res = attempt()
        except REJECTIONS:
            continue
        return SubextremeVerdict(False, kind, res)
    raise FlatPlanError("no split applies to a non-Dirac tuple in V^N[C]")


def split_any(t: MeasureTuple, kind: str | None = None) -> SplitResult:
    """First successful split, optionally restricted to one kind."""
    if kind is not None and kind not in KINDS:
        raise ValueError(f"unknown split kind {kind!r}")
    errors = []
    for k, attempt in candidate_splits(t):
        if kind is not None and k != kind:
            continue
        try:
            return attempt()
        except REJECTIONS as exc:
            errors.append(f"{k}: {exc}")
    raise PreconditionFailed("no applicable split" + (": " + " | ".join(errors) if errors else ""))


# -- bounded refinement -----------------------------------------------------

@dataclass
class RefineNode:
    tuple: MeasureTuple
    kind: str | None = None
    alpha: float | None = None
    children: list["RefineNode"] = field(default_factory=list)

    def leaves(self) -> list["RefineNode"]:
        if not self.children:
            return [self]
        return [leaf for c in self.children for leaf in c.leaves()]


def refine(t: MeasureTuple, depth: int = 8) -> RefineNode:
    """Split recursively up to ``depth`` levels; subextreme tuples are leaves."""
    node = RefineNode(t)
    if depth <= 0:
        return node
    verdict = classify_subextreme(t)
    if verdict.subextreme:
        return node
    res = verdict.split
    node.kind, node.alpha = res.kind, res.alpha
    # halves keep the parent's C, not their own rounded expectation sum
    node.children = [refine(MeasureTuple(res.a.items, t.C), depth - 1),
                     refine(MeasureTuple(res.b.items, t.C), depth - 1)]
    return node


def expectation_sum(items: Sequence[DecreasingMeasure]) -> float:
    return math.fsum(expectation(m) for m in items)
