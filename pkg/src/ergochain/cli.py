"""Command line entry point: ``ergochain run | list | describe``."""

from __future__ import annotations

import argparse
import json
import sys

from . import runner
from .errors import AnalysisError, ParseError

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_PARSE = 2
EXIT_ANALYSIS = 3


def _run(args) -> int:
    try:
        scenario = runner.resolve_scenario(args.scenario)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    try:
        report = runner.run_scenario(scenario, seed=args.seed, workers=args.workers)
    except AnalysisError as exc:
        print(f"error: scenario '{scenario.name}': {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    out = args.out if args.out is not None else runner.default_out_dir()
    target = runner.write_report(report, out)
    for w in report.body["warnings"]:
        print(f"warning: {w['category']}: {w['message']}", file=sys.stderr)
    for r in report.body["results"]:
        res = r["result"]
        line = f"{r['analysis']:<15}"
        if "pattern" in res:
            line += f" pattern={json.dumps(res['pattern'])}"
        if "match" in res:
            line += f" predicted={json.dumps(res['predicted'])} match={res['match']} stability={res['stability']:.3f}"
        if "verdict" in res:
            line += f" verdict={res['verdict']}"
        if "gamma_weak" in res:
            line += f" gamma_weak={res['gamma_weak']} gamma_strong={res['gamma_strong']}"
        if "l1" in res:
            line += f" l1_verdict={res['l1']['verdict']}"
        print(line)
    print(f"report: {target / 'report.json'}")
    fail = args.fail_on_mismatch or scenario.fail_on_mismatch
    if fail and report.mismatch:
        print("error: empirical pattern does not match the prediction", file=sys.stderr)
        return EXIT_MISMATCH
    return EXIT_OK


def _list(args) -> int:
    cat = runner.catalog()
    if args.json:
        print(json.dumps({"schema_version": runner.SCHEMA_VERSION, "scenarios": cat}, indent=2))
        return EXIT_OK
    width = max(len(c["name"]) for c in cat)
    for c in cat:
        print(f"{c['name']:<{width}}  {c['construct']}")
    return EXIT_OK


def _describe(args) -> int:
    try:
        text = runner.bundled_text(args.name)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ergochain", description="Ergodicity classes of random stochastic chains.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario file or a bundled scenario by name")
    r.add_argument("scenario")
    r.add_argument("--out", default=None, help=f"output directory (default: ${runner.OUT_ENV} or ./{runner.DEFAULT_OUT})")
    r.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    r.add_argument("--workers", type=int, default=1, help="worker processes for trial blocks")
    r.add_argument("--fail-on-mismatch", action="store_true", help="exit with status 1 if verification fails")
    r.set_defaults(func=_run)

    ls = sub.add_parser("list", help="list bundled scenarios")
    ls.add_argument("--json", action="store_true", help="machine-readable catalog")
    ls.set_defaults(func=_list)

    d = sub.add_parser("describe", help="print a bundled scenario")
    d.add_argument("name")
    d.set_defaults(func=_describe)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
