"""Command line: ``python -m scaleflow {run,list-scenarios,describe}``."""

import argparse
import sys

from .harness import ConfigError, bundled_scenarios, describe, load_scenario, run


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="scaleflow", description="Run numerical checks of unregularized gradient flows.")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a scenario file or bundled scenario")
    p_run.add_argument("scenario", nargs="+", help="TOML file or bundled scenario name")
    p_run.add_argument("--out", default=None, help="output directory (default $SCALEFLOW_OUT or ./scaleflow-out)")
    p_run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p_run.add_argument("--jobs", type=int, default=1, help="worker threads across family members")
    sub.add_parser("list-scenarios", help="list bundled scenarios")
    p_desc = sub.add_parser("describe", help="describe what a scenario checks")
    p_desc.add_argument("scenario")
    args = parser.parse_args(argv)

    try:
        if args.command == "list-scenarios":
            for name in bundled_scenarios():
                summary = load_scenario(name).get("summary", "").strip()
                print(f"{name:32s} {summary}")
            return 0
        if args.command == "describe":
            print(describe(args.scenario))
            return 0
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        code = 0
        for ref in args.scenario:
            status, report = run(ref, out=args.out, seed=args.seed, jobs=args.jobs)
            for check, res in report["checks"].items():
                print(f"{report['scenario']:32s} {check:12s} {'PASS' if res['passed'] else 'FAIL'}")
            code = max(code, status)
        return code
    except ConfigError as exc:
        print(f"scaleflow: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
