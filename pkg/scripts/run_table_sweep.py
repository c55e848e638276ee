#!/usr/bin/env python3
"""Training-size sweep on the pickup scenario.

Trains one model per corpus size, runs scripted pickup episodes with
each, and prints success rate, mean episode duration, and mean
smoothness-per-duration, one row per corpus size.
"""
import argparse
import warnings

import numpy as np

from verbaplan.datagen import default_arm
from verbaplan.experiments import run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="1000,3000,10000", help="comma-separated corpus sizes")
    ap.add_argument("--episodes", type=int, default=10)
    ap.add_argument("--seeds", default="1,2,3", help="comma-separated sweep seeds")
    ap.add_argument("--restarts", type=int, default=8)
    ap.add_argument("--arm", default="planar3")
    args = ap.parse_args()

    warnings.filterwarnings("ignore")
    arm = default_arm(args.arm)
    sizes = [int(s) for s in args.sizes.split(",")]
    seeds = [int(s) for s in args.seeds.split(",")]

    acc = {n: [] for n in sizes}
    dur = {n: [] for n in sizes}
    smooth = {n: [] for n in sizes}
    for seed in seeds:
        rows = run_sweep(corpus_sizes=sizes, episodes=args.episodes, seed=seed, arm=arm, restarts=args.restarts)
        for row in rows:
            acc[row.corpus_size].append(row.rate)
            dur[row.corpus_size].append(row.mean_duration)
            smooth[row.corpus_size].append(row.mean_smoothness)
            fails = [r.reason for r in row.results if not r.success]
            tag = f"  failures: {fails}" if fails else ""
            print(f"seed {seed}  n={row.corpus_size:>6}  success {row.successes}/{row.episodes}{tag}")

    print("\n# corpus_size  success_rate  duration_s  smoothness/duration")
    for n in sizes:
        print(
            f"{n:>12}  {np.mean(acc[n]):.2f}          "
            f"{np.nanmean(dur[n]):.2f}        {np.nanmean(smooth[n]):.3f}"
        )


if __name__ == "__main__":
    main()
