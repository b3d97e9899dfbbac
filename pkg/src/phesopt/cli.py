"""Command-line entry point: ``phesopt run | gen-data | dump | solve``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .fixture import write_fixture
from .lp import ProblemValidationError, dump_problem, load_problem
from .market import BuildError, InternalConsistencyError, build_milp
from .milp import MilpProblem, solve_milp
from .model import InstanceValidationError
from .runner import TIME_LIMIT_ENV, ConfigError, build_instance, emit_report, load_run_config, run_cases
from .scenarios import DataQualityError, ParseError

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3
EXIT_IO = 4


def _case_list(text: str) -> list[int]:
    try:
        ids = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"cases must be comma-separated integers, got {text!r}") from None
    bad = [c for c in ids if c not in (1, 2, 3, 4)]
    if bad or not ids:
        raise argparse.ArgumentTypeError(f"cases must be drawn from 1,2,3,4, got {text!r}")
    return ids


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phesopt", description="Wind + pumped-hydro market dispatch.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the comparison cases and write reports")
    run.add_argument("--config", type=Path, help="run configuration (default: bundled fixture)")
    run.add_argument("--cases", type=_case_list, default=[1, 2, 3, 4], help="e.g. 1,2,3,4")
    run.add_argument("--extended", action="store_true", help="add sell caps and reservoir restoration")
    run.add_argument("--seed", type=int, help="override the configured seed")
    run.add_argument("--out", type=Path, required=True, help="output directory")
    run.add_argument("--workers", type=int, help="processes for scenario solves")
    run.add_argument("--timings", action="store_true", help="include wall times (outputs stop being reproducible)")

    gen = sub.add_parser("gen-data", help="write the bundled synthetic data set and config")
    gen.add_argument("--out", type=Path, required=True)

    dump = sub.add_parser("dump", help="write one scenario MILP in the text format read by solve")
    dump.add_argument("--config", type=Path)
    dump.add_argument("--case", type=int, choices=(1, 2, 3, 4), default=4)
    dump.add_argument("--scenario", type=int, default=1, help="1-based scenario index")
    dump.add_argument("--extended", action="store_true")
    dump.add_argument("--seed", type=int)
    dump.add_argument("--out", type=Path, required=True)

    solve = sub.add_parser("solve", help="solve a dumped MILP and print the result as JSON")
    solve.add_argument("--problem", type=Path, required=True)
    solve.add_argument("--time-limit", type=float, default=60.0)
    parser.epilog = f"Set {TIME_LIMIT_ENV} to override the per-scenario time limit."
    return parser


def _run(args) -> int:
    overrides = {}
    if args.workers is not None:
        overrides["workers"] = str(args.workers)
    cfg = load_run_config(args.config, overrides)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    results = run_cases(cfg, args.cases, args.extended)
    emit_report(results, cfg, args.out, timings=args.timings)
    failed = [r.report for r in results if r.report.status == "time_limit_best"]
    for r in results:
        rep = r.report
        pct = "n/a" if rep.profit_increase_pct is None else f"{rep.profit_increase_pct:+.2f}%"
        print(f"case {rep.case_id}: profit {rep.profit:.2f} TL ({pct}), status {rep.status}")
    for rep in failed:
        print(f"warning: case {rep.case_id} hit a solver limit, gap {rep.max_gap:.4%}", file=sys.stderr)
    print(f"reports written to {args.out}")
    return EXIT_OK


def _dump(args) -> int:
    cfg = load_run_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    inst = build_instance(cfg, args.case, args.extended)
    if not 1 <= args.scenario <= inst.n_scenarios:
        raise ConfigError(f"scenario {args.scenario} outside 1..{inst.n_scenarios}")
    milp, _ = build_milp(inst, args.scenario - 1)
    dump_problem(milp.lp, args.out, milp.binary_vars)
    print(args.out)
    return EXIT_OK


def _solve(args) -> int:
    text = args.problem.read_text(encoding="utf-8")
    lp, binaries = load_problem(text)
    sol = solve_milp(MilpProblem(lp, binaries), time_limit=args.time_limit)
    print(
        json.dumps(
            {
                "status": sol.status,
                "objective": None if sol.x is None else sol.objective_value,
                "nodes": sol.nodes_explored,
                "gap": None if sol.x is None else sol.gap,
                "x": None if sol.x is None else [float(v) for v in sol.x],
            },
            indent=2,
        )
    )
    return EXIT_OK if sol.x is not None or sol.status == "infeasible" else EXIT_SOLVER


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _run(args)
        if args.command == "gen-data":
            for path in write_fixture(args.out):
                print(path)
            return EXIT_OK
        if args.command == "dump":
            return _dump(args)
        return _solve(args)
    except (ConfigError, InstanceValidationError, ParseError, DataQualityError, BuildError, ProblemValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (InternalConsistencyError, ArithmeticError, RuntimeError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
