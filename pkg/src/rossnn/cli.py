"""Command line entry point: ``rossnn <task> --config FILE [options]``."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .config import ConfigError, load_config
from .experiment import TASKS, check_assertions, run, write_outputs

log = logging.getLogger("rossnn")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rossnn", description="Run recurrent spectrum-slicing experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in TASKS + ("scan",):
        s = sub.add_parser(name, help=f"run a {name} experiment" if name != "scan" else
                           "run the config's sweep for its task")
        s.add_argument("--config", required=True, help="YAML experiment config")
        s.add_argument("--seed", type=int, help="override the master seed")
        s.add_argument("--out", default="results", help="output directory (default: ./results)")
        s.add_argument("--workers", type=int, default=1, help="parallel sweep points")
        s.add_argument("--deterministic", action="store_true",
                       help="single worker, no wall times in results.csv (byte-reproducible)")
        s.add_argument("-v", "--verbose", action="count", default=0)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
    except (OSError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg["seed"] = args.seed
    task = cfg.get("task", "equalize")
    if args.command == "scan":
        if not cfg.get("sweep"):
            print("error: scan needs a 'sweep' section in the config", file=sys.stderr)
            return 2
    elif cfg.get("task", args.command) != args.command:
        print(f"error: config task is {task!r} but the command is {args.command!r}", file=sys.stderr)
        return 2
    else:
        cfg["task"] = task = args.command
    workers = 1 if args.deterministic else max(1, args.workers)
    try:
        results = run(cfg, workers)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    path = write_outputs(cfg, results, args.out, args.deterministic)
    failed = [r for r in results if r.status != "ok"]
    print(f"{len(results)} point(s), {len(failed)} failed -> {os.path.relpath(path)}")
    bad = 0
    for a in check_assertions(cfg, results):
        tag = "PASS" if a.passed else "FAIL"
        print(f"[{tag}] {a.name}: {a.detail}{' (acceptance)' if a.acceptance else ''}")
        bad += int(a.acceptance and not a.passed)
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
