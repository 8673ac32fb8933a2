"""Sweep one parameter on 40-node Waxman graphs and print the adaptive vs static summary.

    python scripts/default_sweep.py --param gp --values 0.3,0.5,0.7,0.9 --reps 10 --episodes 20
"""

import argparse
import sys
from dataclasses import replace

from epdist import bench
from epdist.cli import _parse_values


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--param", default="gp", choices=bench.PARAMS)
    ap.add_argument("--values", default="0.3,0.5,0.7,0.9")
    ap.add_argument("--reps", type=int, default=10)
    ap.add_argument("--episodes", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--csv", help="also write the rows here")
    args = ap.parse_args()
    spec = replace(bench.ExperimentSpec(), param=args.param, values=_parse_values(args.param, args.values),
                   policies=["greedy-sp", "static-tree", "greedy-mp", "static-multi-tree", "swap-asap"],
                   reps=args.reps, episodes=args.episodes, master_seed=args.seed)
    rows = bench.run_sweep(spec, workers=args.workers)
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(bench.rows_to_csv(rows))
    sys.stdout.write(bench.format_summary(bench.summarize(rows)))


if __name__ == "__main__":
    main()
