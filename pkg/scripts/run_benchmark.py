#!/usr/bin/env python3
"""Run the benchmark for several planners and print one ASR table per planner.

Example::

    python scripts/run_benchmark.py --planners oracle mock-llm --seed 0
"""

import argparse
import time

from kinoplan.harness import SuiteConfig, load_config, run_suite, with_planner


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--planners", nargs="+", default=["oracle", "mock-llm"])
    parser.add_argument("--config", help="suite TOML; its planner key is overridden")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()

    base = load_config(args.config) if args.config else SuiteConfig(seed=args.seed, workers=args.workers)
    for name in args.planners:
        start = time.perf_counter()
        report = run_suite(with_planner(base, name))
        elapsed = time.perf_counter() - start
        totals = report.to_dict()["totals"]
        print(f"# {name}: {totals['successes']}/{totals['trials']} in {elapsed:.2f} s\n")
        print(report.to_markdown())


if __name__ == "__main__":
    main()
