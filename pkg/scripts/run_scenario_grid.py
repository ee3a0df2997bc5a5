#!/usr/bin/env python3
"""Run the benchmark grid over scenarios, sample sizes, and mixing weights.

Desk-scale defaults (p=200, 50 replicates) finish on a laptop; pass
--full-scale for the full p=1000, 500-replicate configuration.  Results are
one CSV row per (cell, method, replicate) plus a JSON summary per cell,
written under --out-dir.

Examples:
    python scripts/run_scenario_grid.py --scenario 1 --out-dir results/s1
    python scripts/run_scenario_grid.py --scenario 2 --design 2 \
        --methods proposed,baseline,multitask2 --jobs 4 --out-dir results/s2d2
"""

import argparse
import sys
from pathlib import Path

from auxcal.simulation import ScenarioConfig, run_experiment_grid

DESK = {"p": 200, "replicates": 50, "n_grid": (200, 350, 500)}
FULL = {"p": 1000, "replicates": 500, "n_grid": (200, 350, 500)}
ALPHAS = {1: (0.0, 0.25, 0.5, 0.75, 1.0), 2: (0.0, 0.1, 0.2, 0.3)}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--scenario", type=int, choices=(1, 2), required=True)
    parser.add_argument("--design", type=int, choices=(1, 2), default=1)
    parser.add_argument("--methods",
                        default="proposed,baseline,transfer-direct,multitask1,multitask2")
    parser.add_argument("--full-scale", action="store_true",
                        help="p=1000 and 500 replicates (takes hours)")
    parser.add_argument("--replicates", type=int, default=None)
    parser.add_argument("--p", type=int, default=None)
    parser.add_argument("--n", type=int, action="append", default=None)
    parser.add_argument("--alpha", type=float, action="append", default=None)
    parser.add_argument("--n-test", type=int, default=10_000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--jobs", type=int, default=2)
    parser.add_argument("--out-dir", required=True)
    args = parser.parse_args(argv)

    scale = FULL if args.full_scale else DESK
    p = args.p or scale["p"]
    replicates = args.replicates or scale["replicates"]
    n_grid = tuple(args.n) if args.n else scale["n_grid"]
    alphas = tuple(args.alpha) if args.alpha else ALPHAS[args.scenario]
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]

    configs = [
        ScenarioConfig(scenario=args.scenario, design=args.design, n=n, p=p,
                       alpha=alpha, n_test=args.n_test, replicate_seed=args.seed)
        for n in n_grid for alpha in alphas
    ]
    print(f"{len(configs)} cells x {len(methods)} methods x {replicates} replicates")
    table = run_experiment_grid(configs, methods, replicates,
                                parallelism=args.jobs)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table.write_csv(out_dir / "results.csv")
    table.write_summary_json(out_dir / "summary.json")
    for key, cell in table.summary().items():
        print(f"{key}: acc={cell['mean_accuracy']} (se={cell['se_accuracy']}) "
              f"rank={cell['mean_rank_corr']} failures={cell['failures']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
