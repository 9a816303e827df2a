"""Command-line entry point: ``univbandit run|diagnose|oracle-check|sweep``."""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

from . import harness
from .oracles import SCENARIOS, oracle_check

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2
EXIT_ORACLE = 3


def _error(kind: str, message: str, code: int) -> int:
    record = {"error": {"type": kind, "message": message, "exit_code": code}}
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    return code


def _cmd_run(args) -> int:
    cfg = harness.load_config(args.config)
    summary = harness.run(cfg)
    out = harness.output_dir(cfg)
    last = summary["grid"][-1]
    print(json.dumps({"status": "ok", "output_dir": str(out),
                      "per_round_regret": last["per_round_regret_mean"]}, sort_keys=True))
    return EXIT_OK


def _cmd_diagnose(args) -> int:
    cfg = harness.load_config(args.config)
    harness.diagnose(cfg)
    print(json.dumps({"status": "ok", "output_dir": str(harness.output_dir(cfg))}, sort_keys=True))
    return EXIT_OK


def _cmd_oracle(args) -> int:
    names = sorted(SCENARIOS) if args.scenario == "all" else [args.scenario]
    if args.scenario != "all" and args.scenario not in SCENARIOS:
        return _error("UnknownScenario", f"unknown scenario {args.scenario!r}; "
                      f"known: {', '.join(sorted(SCENARIOS))}", EXIT_CONFIG)
    reports = [oracle_check(n) for n in names]
    for rep in reports:
        print(json.dumps(rep, sort_keys=True))
    if all(r["passed"] for r in reports):
        return EXIT_OK
    failed = [r["scenario"] for r in reports if not r["passed"]]
    return _error("OracleFailure", f"failed scenarios: {', '.join(failed)}", EXIT_ORACLE)


def _cmd_sweep(args) -> int:
    # defaults (such as the grid) are derived per swept value, not frozen up front
    cfg = harness.load_config(args.config, apply_defaults=False)
    harness.sweep(cfg, args.param, harness.parse_values(args.values))
    print(json.dumps({"status": "ok", "output_dir": str(harness.output_dir(cfg))}, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="univbandit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run a configured experiment")
    p.add_argument("config")
    p.set_defaults(func=_cmd_run)
    p = sub.add_parser("diagnose", help="process-class diagnostics for a configured process or trace")
    p.add_argument("config")
    p.set_defaults(func=_cmd_diagnose)
    p = sub.add_parser("oracle-check", help="run an oracle scenario (or 'all')")
    p.add_argument("scenario")
    p.set_defaults(func=_cmd_oracle)
    p = sub.add_parser("sweep", help="run a config over several values of one parameter")
    p.add_argument("config")
    p.add_argument("--param", required=True, help="dotted config path, e.g. rule.scale")
    p.add_argument("--values", required=True, help="comma-separated JSON values")
    p.set_defaults(func=_cmd_sweep)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code in (0, None):
            return EXIT_OK
        return _error("UsageError", "invalid command line (see --help)", EXIT_CONFIG)
    try:
        return args.func(args)
    except harness.ConfigError as exc:
        return _error("ConfigError", str(exc), EXIT_CONFIG)
    except Exception as exc:  # noqa: BLE001 - every failure becomes an error record
        return _error(type(exc).__name__, str(exc), EXIT_RUNTIME)


if __name__ == "__main__":
    sys.exit(main())
