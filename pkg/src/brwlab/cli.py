"""Command-line entry point.

Subcommands: params | simulate | max-law | clt | decoration | spine-check |
report.  Every run subcommand takes --config PATH (a JSON experiment config or
a manifest.json from a previous run), plus --seed, --threads and --out
overrides.  --threads must never change any emitted CSV byte; it only changes
wall time.  Exit status is 0 iff no check failed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import load_config
from .errors import BrwLabError
from .runner import run

_SUBCOMMAND_SUITES = {
    "params": ("params",),
    "simulate": ("simulate",),
    "max-law": ("max-law", "slow-max-law", "mean-exploratory"),
    "clt": ("clt",),
    "decoration": ("decoration",),
    "spine-check": ("spine-check",),
}


def _add_run_args(sub):
    sub.add_argument("--config", required=True, help="experiment config JSON (or a manifest)")
    sub.add_argument("--seed", type=int, default=None, help="override master_seed")
    sub.add_argument("--threads", type=int, default=1,
                     help="worker processes; must not change results")
    sub.add_argument("--out", default=None, help="output directory")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="brwlab",
        description="Monte Carlo laboratory for two-speed branching random walks",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    for name in _SUBCOMMAND_SUITES:
        _add_run_args(subs.add_parser(name))
    rep = subs.add_parser("report", help="aggregate verdicts under a directory")
    rep.add_argument("--out", required=True, help="directory containing suite outputs")

    args = parser.parse_args(argv)
    if args.command == "report":
        return _report(Path(args.out))

    try:
        config = load_config(args.config)
    except (OSError, json.JSONDecodeError, BrwLabError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    allowed = _SUBCOMMAND_SUITES[args.command]
    if config.suite not in allowed:
        print(f"config error: suite {config.suite!r} does not belong to the "
              f"{args.command!r} subcommand (expected one of {allowed})",
              file=sys.stderr)
        return 2
    try:
        return run(config, out_dir=args.out, threads=args.threads,
                   seed_override=args.seed)
    except BrwLabError as err:
        print(f"run error: {err}", file=sys.stderr)
        return 2


def _report(out: Path) -> int:
    verdicts = sorted(out.rglob("verdict.json"))
    if not verdicts:
        print(f"no verdict.json found under {out}", file=sys.stderr)
        return 2
    worst = "pass"
    for path in verdicts:
        with open(path) as f:
            doc = json.load(f)
        print(f"{doc['suite']:>18}  {doc['status']:>4}  "
              f"{doc['runtime_seconds']:>9.2f}s  {path.parent}")
        for check in doc["checks"]:
            mark = {"pass": "+", "warn": "~", "fail": "x"}[check["status"]]
            line = f"    [{mark}] {check['name']}"
            if check.get("value") is not None:
                line += f": {check['value']}"
            if check.get("threshold") is not None:
                line += f" (threshold {check['threshold']})"
            print(line)
        if doc["status"] == "fail":
            worst = "fail"
        elif doc["status"] == "warn" and worst == "pass":
            worst = "warn"
    return 0 if worst != "fail" else 1


if __name__ == "__main__":
    sys.exit(main())
