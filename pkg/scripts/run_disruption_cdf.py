"""Empirical CDF of throughput disruption under transient blockage at 3 m and 7 m."""

import argparse
from pathlib import Path

from picocell60.harness import disruption_stats


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--fraction", type=float, default=0.5,
                    help="throughput share below which the link counts as disrupted")
    ap.add_argument("--out", default="results/disruption")
    args = ap.parse_args()

    for d in (3.0, 7.0):
        stats = disruption_stats(args.trials, d, seed=args.seed, fraction=args.fraction)
        x, _ = stats.ecdf()
        path = stats.write_csv(Path(args.out) / f"disruption_{d:g}m.csv")
        print(f"{d:g} m: mean {stats.mean_ms:.0f} ms, median {x[x.size // 2]} ms, "
              f"max {x[-1]} ms, {stats.n_undisrupted} undisrupted -> {path}")


if __name__ == "__main__":
    main()
