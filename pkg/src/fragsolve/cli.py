"""Command line entry point: ``fragsolve solve|oracle|fragments|gen``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .driver import VARIANTS, Config, solve
from .fragments import enumerate_fragments, fragments_to_json
from .instance import InstanceError, OracleTooLarge, oracle_optimum, parse_instance, random_instance

EXIT_OK, EXIT_ERROR, EXIT_TIME_LIMIT = 0, 1, 2

_LOG_LEVELS = {"off": logging.CRITICAL + 1, "info": logging.INFO, "trace": logging.DEBUG}


def _configure_logging():
    level = os.environ.get("FRAGSOLVE_LOG", "off").lower()
    if level not in _LOG_LEVELS:
        raise ValueError(f"FRAGSOLVE_LOG must be one of {sorted(_LOG_LEVELS)}, got {level!r}")
    logging.basicConfig(level=_LOG_LEVELS[level], stream=sys.stderr,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")


def _read_instance(path: str, fmt: str):
    if path == "-":
        text, name = sys.stdin.read(), "stdin"
    else:
        with open(path) as fh:
            text = fh.read()
        name = os.path.splitext(os.path.basename(path))[0]
    return parse_instance(text, fmt, name=name)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fragsolve", description="Exact PDPTW solver over fragments.")
    sub = parser.add_subparsers(dest="command", required=True)
    fmt_choices = ("auto", "canonical_json", "benchmark_text")

    p = sub.add_parser("solve", help="solve an instance to optimality")
    p.add_argument("file", help="instance file, or - for standard input")
    p.add_argument("--variant", choices=VARIANTS, default="DFC")
    p.add_argument("--format", choices=fmt_choices, default="auto")
    p.add_argument("--time-limit", type=float, default=None, help="seconds")
    p.add_argument("--json-out", default=None, help="write the run report here")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("oracle", help="brute-force optimum by route enumeration (small instances)")
    p.add_argument("file")
    p.add_argument("--format", choices=fmt_choices, default="auto")

    p = sub.add_parser("fragments", help="dump the enumerated fragments as JSON")
    p.add_argument("file")
    p.add_argument("--format", choices=fmt_choices, default="auto")

    p = sub.add_parser("gen", help="print a random instance as JSON")
    p.add_argument("--pairs", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    return parser


def _cmd_solve(args) -> int:
    if args.time_limit is not None and args.time_limit <= 0:
        raise ValueError("--time-limit must be positive")
    inst = _read_instance(args.file, args.format)
    report = solve(inst, Config(variant=args.variant, time_limit=args.time_limit, seed=args.seed))
    text = report.to_json()
    if args.json_out:
        with open(args.json_out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    if report.status == "time_limit":
        return EXIT_TIME_LIMIT
    return EXIT_OK if report.status in ("optimal", "infeasible") else EXIT_ERROR


def _cmd_oracle(args) -> int:
    inst = _read_instance(args.file, args.format)
    sol = oracle_optimum(inst)
    if not sol.feasible:
        print("infeasible")
        return EXIT_OK
    print(f"vehicles {sol.vehicles}")
    print(f"cost {sol.cost:.2f}")
    for route in sol.routes:
        print("route " + " ".join(map(str, route.path)))
    return EXIT_OK


def _cmd_fragments(args) -> int:
    inst = _read_instance(args.file, args.format)
    frags, _ = enumerate_fragments(inst)
    print(fragments_to_json(frags))
    return EXIT_OK


def _cmd_gen(args) -> int:
    if args.pairs < 0:
        raise ValueError("--pairs must be non-negative")
    print(json.dumps(random_instance(args.pairs, args.seed).to_json()))
    return EXIT_OK


_COMMANDS = {"solve": _cmd_solve, "oracle": _cmd_oracle, "fragments": _cmd_fragments, "gen": _cmd_gen}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed the usage error
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    try:
        _configure_logging()
        return _COMMANDS[args.command](args)
    except (OSError, ValueError, InstanceError, OracleTooLarge) as exc:
        print(f"fragsolve: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
