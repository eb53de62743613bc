"""Command-line entry point: ``fit``, ``enumerate`` and ``bench``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .core import render
from .data import inject_noise, load_dataset, save_report
from .enumeration import ALL_RULES, PAPER_COUNTS, OperatorSet, enumerate_gentrees, parse_rules
from .errors import ConfigError, ParseError, ShapeError, UnknownLabel
from .scheduler import DEFAULT_PLAN, Phase, parse_plan, search_with_restarts
from .subsolver import SOLVED, SolverConfig

EXIT_OK, EXIT_USAGE, EXIT_NO_MODEL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; 2 is reserved for "no model"
    def error(self, message):
        self.print_help(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gentree", description="Symbolic regression over gentrees of L-monomials.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    f = sub.add_parser("fit", help="search for a formula matching a data file")
    f.add_argument("--data", required=True)
    f.add_argument("--units")
    f.add_argument("--depth", type=int, default=3)
    f.add_argument("--max-constants", type=int, default=1)
    f.add_argument("--omega", type=float, default=100.0)
    f.add_argument("--delta", type=int, default=2)
    f.add_argument("--tau", type=int, default=6)
    f.add_argument("--tol", type=float, default=1e-4)
    f.add_argument("--relative-tol", action="store_true",
                   help="accept fits with SSE <= tol * sum(y^2) instead of SSE <= tol")
    f.add_argument("--time-limit", type=float, default=600.0)
    f.add_argument("--threads", type=int, default=1)
    f.add_argument("--slice", type=float, default=10.0)
    f.add_argument("--noise", type=float, default=0.0)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--dimensioned-constants", action="store_true")
    f.add_argument("--ops", default=None, help="comma list, e.g. add,mul,div,sqrt")
    f.add_argument("--restart-plan", default=None, help="ops:tol[:budget];... phases run in order")
    f.add_argument("--report-out")

    e = sub.add_parser("enumerate", help="count (and optionally print) gentrees")
    e.add_argument("--depth", type=int, required=True)
    e.add_argument("--ops", default=None)
    e.add_argument("--rules", default="all")
    e.add_argument("--preset", choices=["paper-counts"])
    e.add_argument("--print-trees", action="store_true")

    b = sub.add_parser("bench", help="run registry problems")
    b.add_argument("--labels", default="", help="comma list of registry labels")
    b.add_argument("--threads", type=int, default=4)
    b.add_argument("--time-limit", type=float, default=600.0)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--report-out")
    return p


def _cmd_fit(args) -> int:
    data = load_dataset(args.data, args.units)
    if args.noise:
        data = inject_noise(data, args.noise, args.seed)
    cfg = SolverConfig(depth=args.depth, max_constants=args.max_constants, omega=args.omega,
                       delta=args.delta, tau=args.tau, tol=args.tol, tol_relative=args.relative_tol,
                       time_limit_s=args.time_limit, dimensioned_constants=args.dimensioned_constants)
    if args.restart_plan:
        plan = parse_plan(args.restart_plan)
    elif args.ops:
        plan = [Phase(OperatorSet.parse(args.ops), args.tol, None)]
    else:
        plan = [Phase(cfg.ops, args.tol, None)]
    report = search_with_restarts(data, cfg, plan, threads=args.threads, slice_s=args.slice)
    report.seed = args.seed
    if args.report_out:
        save_report(report, args.report_out)
    if report.answer is None:
        print(f"status: {report.status}; no model found")
        return EXIT_NO_MODEL
    print(f"status: {report.status}")
    print(f"formula: {report.formula}")
    print(f"sse: {report.sse:.6g}")
    print(f"elapsed_s: {report.elapsed_s:.3f}")
    return EXIT_OK


def _cmd_enumerate(args) -> int:
    if args.preset == "paper-counts":
        ops, rules, canon = PAPER_COUNTS["ops"], PAPER_COUNTS["rules"], PAPER_COUNTS["canonicalize"]
    else:
        ops, rules, canon = PAPER_COUNTS["ops"], ALL_RULES, True
    if args.ops:
        ops = OperatorSet.parse(args.ops)
    if args.rules != "all" or args.preset is None:
        rules = parse_rules(args.rules)
    cat = enumerate_gentrees(args.depth, ops, rules, canon)
    per = cat.count_by_depth()
    cum = cat.cumulative_counts(args.depth)
    print("depth\tcount\tcumulative")
    for d in range(args.depth + 1):
        print(f"{d}\t{per.get(d, 0)}\t{cum[d]}")
    if args.print_trees:
        for t in cat:
            print(t.serial)
    return EXIT_OK


def _cmd_bench(args) -> int:
    from .bench import benchmark_config, run_benchmark, summarize

    labels = [s.strip() for s in args.labels.split(",") if s.strip()]
    cfg = benchmark_config(time_limit_s=args.time_limit)
    rows = run_benchmark(labels, cfg, args.threads, seed=args.seed)
    print(summarize(rows))
    if args.report_out:
        payload = {"rows": [r.to_dict() for r in rows],
                   "reports": [r.report.to_dict() for r in rows if r.report is not None]}
        Path(args.report_out).write_text(json.dumps(payload, indent=2), encoding="utf-8")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    handler = {"fit": _cmd_fit, "enumerate": _cmd_enumerate, "bench": _cmd_bench}[args.command]
    try:
        return handler(args)
    except (OSError, ParseError, ShapeError, ConfigError, UnknownLabel, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def cli(argv=None) -> int:
    return main(argv)


if __name__ == "__main__":
    sys.exit(main())
