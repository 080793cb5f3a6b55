"""Command-line front end: run experiments, summarize results, self-test."""

from __future__ import annotations

import argparse
import sys

from .checks import ao_audit, property_suite
from .errors import BibcError
from .harness import (config_from_pairs, parse_kv, render_summary,
                      run_experiment, summarize)


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="bibc",
        description="Backscatter-link resource allocation: train learners, "
                    "run the optimization benchmark, and compare results.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment (one algorithm, "
                                     "one or more seeds)")
    run.add_argument("--config", help="key=value config file")
    run.add_argument("--algo", help="algorithm override")
    run.add_argument("--seed", type=int, help="single seed override")
    run.add_argument("--seeds", help="comma-separated seed list override")
    run.add_argument("--episodes", type=int, help="episode count override")
    run.add_argument("--steps", type=int, help="steps per episode override")
    run.add_argument("--set", dest="overrides", action="append", default=[],
                     metavar="KEY=VALUE", help="any config key override")
    run.add_argument("--out", default="results", help="output directory")

    summ = sub.add_parser("summarize", help="final-window comparison table")
    summ.add_argument("--baseline", required=True,
                      help="algorithm the gains are measured against")
    summ.add_argument("--window", type=int, default=500,
                      help="episodes in the final window (default 500)")
    summ.add_argument("files", nargs="+", help="*_episodes.csv files")

    test = sub.add_parser("selftest", help="run the property suite")
    test.add_argument("--audit", action="store_true",
                      help="also audit the optimization benchmark (slower)")
    test.add_argument("--instances", type=int, default=20,
                      help="audit instance count (default 20)")
    return parser


def _run_command(args):
    pairs = {}
    if args.config:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                pairs = parse_kv(fh.read())
        except OSError as exc:
            raise BibcError(f"cannot read config file {args.config}: {exc}")
    for item in args.overrides:
        if "=" not in item:
            raise BibcError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        pairs[key.strip()] = value.strip()
    if args.algo:
        pairs["algorithm"] = args.algo
    if args.seeds:
        pairs["seeds"] = args.seeds
    if args.seed is not None:
        pairs["seeds"] = str(args.seed)
    if args.episodes is not None:
        pairs["episodes"] = str(args.episodes)
    if args.steps is not None:
        pairs["steps"] = str(args.steps)
    config = config_from_pairs(pairs)
    result = run_experiment(config, args.out)
    for paths in result["runs"]:
        print(paths[0])
    print(result["aggregate"])
    return 0


def _summarize_command(args):
    rows = summarize(args.files, args.baseline, window=args.window)
    print(render_summary(rows, args.baseline))
    return 0


def _selftest_command(args):
    results = property_suite()
    if args.audit:
        results += ao_audit(instances=args.instances)
    for res in results:
        print(res.line())
    failed = sum(1 for r in results if not r.passed)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _run_command(args)
        if args.command == "summarize":
            return _summarize_command(args)
        return _selftest_command(args)
    except BibcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
