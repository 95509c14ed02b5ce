"""JSON and CSV formats for measures, tuples, verdicts, splits and couplings.

Floats are written with 17 significant digits so a round trip is exact.
Field order is fixed by the order in which dicts are built here.
"""
from __future__ import annotations

import csv
import io
import json
import math
from typing import Any

from .errors import FlatPlanError
from .flatness import FlatVerdict, MeasureTuple
from .measures import DecreasingMeasure, StepDensity, from_step_density, to_step_density
from .planner import Coupling, CouplingReport, CostReport, Grid
from .splits import RefineNode, SplitResult


class ParseError(FlatPlanError):
    """Malformed input file; the message carries line and column when known."""


def fmt(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite float {x!r}")
    return format(x, ".17g")


def dumps(obj: Any, indent: int = 2, _level: int = 0) -> str:
    """Minimal JSON writer with fixed 17-digit float rendering."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return fmt(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        body = ",\n".join(f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items())
        return "{\n" + body + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        body = ",\n".join(pad + dumps(v, indent, _level + 1) for v in obj)
        return "[\n" + body + "\n" + end + "]"
    if hasattr(obj, "item"):  # numpy scalar
        return dumps(obj.item(), indent, _level)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def loads(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def _num(d: dict, key: str, default=None) -> float:
    if key not in d:
        if default is None:
            raise ParseError(f"missing field {key!r}")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"field {key!r} must be a number")
    return float(v)


def measure_to_json(m: DecreasingMeasure) -> dict:
    return {"l": m.l, "r": m.r, "atom": m.atom, "parts": [[t, w] for t, w in m.parts]}


def step_density_to_json(sd: StepDensity) -> dict:
    return {"breakpoints": list(sd.breakpoints), "values": list(sd.values), "atom": sd.atom}


def measure_from_json(d: Any) -> DecreasingMeasure:
    """Accepts either the mixture form or the step-density form."""
    if not isinstance(d, dict):
        raise ParseError("a measure must be a JSON object")
    if "breakpoints" in d:
        sd = StepDensity(tuple(map(float, d["breakpoints"])), tuple(map(float, d.get("values", []))),
                         _num(d, "atom", 0.0))
        return from_step_density(sd)
    parts = d.get("parts", [])
    if not isinstance(parts, list) or any(not isinstance(p, list) or len(p) != 2 for p in parts):
        raise ParseError("'parts' must be a list of [t, w] pairs")
    return DecreasingMeasure.build(_num(d, "l"), _num(d, "r"), _num(d, "atom", 0.0),
                                   [(float(t), float(w)) for t, w in parts])


def tuple_to_json(t: MeasureTuple) -> dict:
    return {"items": [measure_to_json(m) for m in t.items]}


def tuple_from_json(d: Any) -> MeasureTuple:
    if not isinstance(d, dict) or not isinstance(d.get("items"), list):
        raise ParseError("a tuple file must be an object with an 'items' list")
    C = d.get("C")
    return MeasureTuple.of([measure_from_json(m) for m in d["items"]],
                           None if C is None else float(C))


def verdict_to_json(v: FlatVerdict) -> dict:
    return v.to_json()


def split_to_json(res: SplitResult) -> dict:
    return {"alpha": res.alpha, "kind": res.kind, "a": tuple_to_json(res.a), "b": tuple_to_json(res.b)}


def refine_to_json(node: RefineNode) -> dict:
    return {"kind": node.kind, "alpha": node.alpha, "tuple": tuple_to_json(node.tuple),
            "children": [refine_to_json(c) for c in node.children]}


def coupling_to_csv(c: Coupling, grid: Grid) -> str:
    N = grid.N
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"i{k + 1}" for k in range(N)] + [f"x{k + 1}" for k in range(N)] + ["weight"])
    for idx, wt in sorted(c.entries):
        w.writerow([str(i) for i in idx] + [fmt(grid.position(k, i)) for k, i in enumerate(idx)] + [fmt(wt)])
    return buf.getvalue()


def coupling_from_csv(text: str) -> tuple[list[tuple[int, ...]], list[list[float]], list[float]]:
    """Returns ``(indices, positions, weights)``."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ParseError("empty coupling file")
    head = rows[0]
    if len(head) < 3 or head[-1] != "weight" or (len(head) - 1) % 2:
        raise ParseError("line 1: header must be i1,...,iN,x1,...,xN,weight")
    N = (len(head) - 1) // 2
    idx, pts, ws = [], [], []
    for ln, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 2 * N + 1:
            raise ParseError(f"line {ln}: expected {2 * N + 1} fields, got {len(row)}")
        try:
            idx.append(tuple(int(v) for v in row[:N]))
            pts.append([float(v) for v in row[N:2 * N]])
            ws.append(float(row[-1]))
        except ValueError as exc:
            raise ParseError(f"line {ln}: {exc}") from None
    return idx, pts, ws


def plan_report(grid: Grid, C: float, band: float, report: CouplingReport, cost: CostReport) -> dict:
    return {"grid": grid.to_json(), "C": C, "band": band, "verify": report.to_json(), "cost": cost.to_json()}


__all__ = [
    "ParseError", "fmt", "dumps", "loads", "measure_to_json", "measure_from_json",
    "step_density_to_json", "to_step_density", "tuple_to_json", "tuple_from_json",
    "verdict_to_json", "split_to_json", "refine_to_json", "coupling_to_csv",
    "coupling_from_csv", "plan_report",
]
