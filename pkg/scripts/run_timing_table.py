"""Re-estimate drop/recovery timing and quality-change means from sampled episodes."""

import argparse
from pathlib import Path

from picocell60.distributions import default_distributions
from picocell60.harness import timing_summary, write_timing_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=10000)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", default="results/timing")
    args = ap.parse_args()

    dists = default_distributions()
    rows = timing_summary(args.trials, seed=args.seed, dists=dists)
    print("scen  dist   t_D mean (target)     t_R mean (target)      dq_D   dq_R")
    for r in rows:
        cal = dists.entries[(r.scenario, r.distance_m)]
        t_r = "-" if r.t_recovery_mean_ms is None else \
            f"{r.t_recovery_mean_ms:8.1f} ({cal.t_recovery.mean_ms:g})"
        print(f"{r.scenario:>4} {r.distance_m:4g} m  {r.t_drop_mean_ms:7.1f} ({cal.t_drop.mean_ms:g})"
              f"   {t_r:>20}  {r.dq_drop_mean:5.2f}  {r.dq_rise_mean:5.2f}")
    print(write_timing_csv(Path(args.out) / "timing.csv", rows))


if __name__ == "__main__":
    main()
