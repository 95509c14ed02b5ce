"""Command-line entry point: ``flatplan <command> --input FILE [options]``.

Exit codes: 0 success; 1 input error; 2 precondition rejection;
3 ``check`` found the tuple not flat; 4 ``plan`` found no coupling.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import jsonio
from .errors import (
    DomainError,
    FlatPlanError,
    HypothesisViolated,
    Infeasible,
    MassError,
    NonincreasingViolation,
    NotInVNC,
    NumericalDegenerate,
    PreconditionFailed,
    RejectNotStepForm,
    SizeExceeded,
    SupportMismatch,
)
from .flatness import check_flat_criterion
from .oracle import oracle_tuple
from .planner import cost_from_points, harmonic_cost, plan, verify_coupling
from .splits import refine, split_any

log = logging.getLogger("flatplan")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_REJECTED = 2
EXIT_NOT_FLAT = 3
EXIT_INFEASIBLE = 4

INPUT_ERRORS = (jsonio.ParseError, DomainError, MassError, NonincreasingViolation, SupportMismatch,
                OSError, UnicodeDecodeError)
REJECTIONS = (RejectNotStepForm, NotInVNC, PreconditionFailed, HypothesisViolated,
              NumericalDegenerate, SizeExceeded)


@dataclass
class RunConfig:
    command: str
    input: Path | None = None
    output: Path | None = None
    h: float = 1 / 16
    band: float | None = None
    depth: int = 8
    seed: int = 42
    kind: str | None = None
    count: int = 200


def _read(path: Path) -> str:
    return path.read_text(encoding="utf-8")


def _emit(cfg: RunConfig, text: str) -> None:
    if not text.endswith("\n"):
        text += "\n"
    if cfg.output is None:
        sys.stdout.write(text)
    else:
        cfg.output.write_text(text, encoding="utf-8")


def _load_tuple(cfg: RunConfig):
    return jsonio.tuple_from_json(jsonio.loads(_read(cfg.input)))


def _grid_path(csv_path: Path) -> Path:
    return csv_path.with_suffix(".grid.json")


def cmd_check(cfg: RunConfig) -> int:
    verdict = check_flat_criterion(_load_tuple(cfg))
    _emit(cfg, jsonio.dumps(verdict.to_json()))
    return EXIT_OK if verdict.flat else EXIT_NOT_FLAT


def cmd_plan(cfg: RunConfig) -> int:
    t = _load_tuple(cfg)
    try:
        grid, hists, coupling, band = plan(t, cfg.h, cfg.band)
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    report = verify_coupling(coupling, grid, hists, t.C, band)
    cost = harmonic_cost(coupling, grid, t.C)
    _emit(cfg, jsonio.coupling_to_csv(coupling, grid))
    text = jsonio.dumps(jsonio.plan_report(grid, t.C, band, report, cost)) + "\n"
    if cfg.output is None:
        sys.stderr.write(text)
    else:
        _grid_path(cfg.output).write_text(text, encoding="utf-8")
    return EXIT_OK


def cmd_split(cfg: RunConfig) -> int:
    res = split_any(_load_tuple(cfg), cfg.kind)
    _emit(cfg, jsonio.dumps(jsonio.split_to_json(res)))
    return EXIT_OK


def cmd_refine(cfg: RunConfig) -> int:
    tree = refine(_load_tuple(cfg), cfg.depth)
    _emit(cfg, jsonio.dumps(jsonio.refine_to_json(tree)))
    return EXIT_OK


def cmd_oracle(cfg: RunConfig) -> int:
    _emit(cfg, jsonio.dumps(oracle_tuple(_load_tuple(cfg), cfg.h)))
    return EXIT_OK


def cmd_cost(cfg: RunConfig) -> int:
    _, pts, ws = jsonio.coupling_from_csv(_read(cfg.input))
    if not ws:
        raise jsonio.ParseError("coupling file has no rows")
    C = None
    side = _grid_path(cfg.input)
    if side.exists():
        C = jsonio.loads(_read(side)).get("C")
    _emit(cfg, jsonio.dumps(cost_from_points(pts, ws, C).to_json()))
    return EXIT_OK


def cmd_selftest(cfg: RunConfig) -> int:
    from .selftest import run_selftest

    results = run_selftest(cfg.seed, cfg.count)
    _emit(cfg, jsonio.dumps(results))
    return EXIT_OK if all(r["failures"] == 0 for r in results["suites"]) else EXIT_INPUT


COMMANDS = {
    "check": cmd_check, "plan": cmd_plan, "split": cmd_split, "refine": cmd_refine,
    "oracle": cmd_oracle, "cost": cmd_cost, "selftest": cmd_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flatplan", description="Flat transport plans for decreasing-density marginals.")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "check": "evaluate the flatness criterion (exit 0 flat, 3 not flat)",
        "plan": "discretize and build a coupling on the hyperplane (exit 4 if none)",
        "split": "split a step tuple into two compatible halves",
        "refine": "apply splits recursively and print the tree",
        "oracle": "exact rational minimum cost and slice feasibility",
        "cost": "harmonic cost of a coupling CSV",
        "selftest": "run the randomized invariant suites",
    }
    for name, text in helps.items():
        s = sub.add_parser(name, help=text)
        s.add_argument("--input", type=Path, required=name != "selftest")
        s.add_argument("--output", type=Path)
        if name in ("plan", "oracle"):
            s.add_argument("--h", type=float, default=1 / 16, help="target grid spacing")
        if name == "plan":
            s.add_argument("--band", type=float, help="slice half-width (default 0, or N*h/2 when unaligned)")
        if name == "refine":
            s.add_argument("--depth", type=int, default=8)
        if name == "split":
            s.add_argument("--kind", choices=["midpoint", "exchange", "peel", "beta", "moment"])
        if name == "selftest":
            s.add_argument("--seed", type=int, default=42)
            s.add_argument("--count", type=int, default=200, help="instances per suite")
    return p


def parse_config(argv=None) -> RunConfig:
    ns = build_parser().parse_args(argv)
    return RunConfig(**{k: v for k, v in vars(ns).items() if v is not None or k in ("band", "kind")})


def main(argv=None) -> int:
    level = os.environ.get("FLATPLAN_LOG", "WARNING").upper()
    if not isinstance(logging.getLevelName(level), int):
        level = "WARNING"
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    cfg = parse_config(argv)
    try:
        return COMMANDS[cfg.command](cfg)
    except INPUT_ERRORS as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except REJECTIONS as exc:
        print(f"rejected: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_REJECTED
    except FlatPlanError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_REJECTED


if __name__ == "__main__":
    sys.exit(main())
