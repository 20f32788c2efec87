"""Time until a blocked link with no reflected path stops carrying data."""

import argparse
from pathlib import Path

import numpy as np

from picocell60.csvio import write_table
from picocell60.harness import disconnection_stats


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--distance", type=float, default=7.0)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", default="results/link_death")
    args = ap.parse_args()

    t_dc = disconnection_stats(args.trials, seed=args.seed, distance_m=args.distance)
    print(f"{t_dc.size}/{args.trials} links died; mean {t_dc.mean():.0f} ms, "
          f"sd {t_dc.std():.0f} ms, range {t_dc.min()}..{t_dc.max()} ms")
    q = np.percentile(t_dc, [10, 50, 90])
    print("p10/p50/p90:", " / ".join(f"{v:.0f}" for v in q))
    print(write_table(Path(args.out) / "t_dc.csv", ("trial", "t_dc_ms"), enumerate(t_dc.tolist())))


if __name__ == "__main__":
    main()
