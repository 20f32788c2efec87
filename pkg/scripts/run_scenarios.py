"""Run every shipped scenario config and export its logs under one directory each."""

import argparse
from pathlib import Path

from picocell60 import config
from picocell60.sim import run

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("names", nargs="*", help="config stems to run (default: all with a scenario)")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--out", default="results/scenarios")
    args = ap.parse_args()

    paths = [CONFIGS / f"{n}.yaml" for n in args.names] or sorted(CONFIGS.glob("*.yaml"))
    for path in paths:
        raw = config.load(path)
        if not raw.get("scenario"):
            continue
        log = run(config.scenario(raw, seed=args.seed))
        log.export(Path(args.out) / path.stem)
        s = log.summary()
        print(f"== {path.stem}")
        for sid, row in s["stas"].items():
            print(f"  {sid}: {row['mean_throughput_mbps']:.0f} Mbps mean, "
                  f"handoffs {row['handoff_triggers'] or 'none'}, ends on {row['final_ap']}")
        if "interference" in s:
            i = s["interference"]
            print(f"  victim {i['victim_sta']}: {i['mean_before_mbps']:.0f} -> {i['mean_during_mbps']:.0f} Mbps")
        if s["t_dc_ms"]:
            print(f"  link death after {s['t_dc_ms']} ms")


if __name__ == "__main__":
    main()
