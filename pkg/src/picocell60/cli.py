"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 config or input error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from picocell60 import config as cfgmod
from picocell60 import csvio, harness
from picocell60.config import DEFAULT_SEED
from picocell60.link_model import Environment, LinkConfig, render_trace, sample_episode
from picocell60.sim import ConfigError, run

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _common(p: argparse.ArgumentParser, trials: bool = False, jobs: bool = False) -> None:
    p.add_argument("--config", metavar="PATH", help="YAML experiment file (defaults compiled in)")
    p.add_argument("--seed", type=int, default=None,
                   help=f"RNG seed; overrides the config's seed (default {DEFAULT_SEED})")
    p.add_argument("--out", metavar="DIR", default="out", help="output directory (default: out)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config value by dotted path, e.g. detector.t_drop_threshold_ms=250; "
                        "repeatable; VALUE is parsed as YAML")
    if trials:
        p.add_argument("--trials", type=int, default=None, metavar="N",
                       help="trials per scenario/cell (overrides the config)")
    if jobs:
        p.add_argument("--jobs", type=int, default=1, metavar="N",
                       help="worker processes; results do not depend on it (default 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="picocell60", description="60 GHz picocell blockage and handoff toolkit")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    p = sub.add_parser("gen-trace", help="render one synthetic blockage trace to CSV")
    _common(p)
    p.add_argument("--scenario", type=int, choices=(1, 2, 3), default=None,
                   help="blockage scenario: 1 transient, 2 permanent, 3 permanent with reflection")
    p.add_argument("--distance", type=float, default=None, metavar="M",
                   help="STA-AP distance in metres")

    p = sub.add_parser("simulate", help="run a scenario from the config's scenario section")
    _common(p)

    p = sub.add_parser("sweep", help="detection accuracy over a threshold grid")
    _common(p, trials=True, jobs=True)

    p = sub.add_parser("replay", help="run the detector over a recorded trace CSV")
    p.add_argument("trace", metavar="TRACE_CSV", help="file with header t_ms,q,throughput_mbps")
    _common(p)

    p = sub.add_parser("timing-summary", help="re-estimate drop/recovery timing statistics")
    _common(p, trials=True)
    return parser


def _write_json(path: Path, obj) -> Path:
    return csvio.atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _seed(args, cfg) -> int:
    return int(args.seed if args.seed is not None else cfg.get("seed", DEFAULT_SEED))


def cmd_gen_trace(args, cfg) -> list[Path]:
    sec = cfg["trace"]
    scenario = args.scenario if args.scenario is not None else int(sec["scenario"])
    distance = args.distance if args.distance is not None else float(sec["distance_m"])
    if distance <= 0:
        raise ConfigError("distance must be positive")
    try:
        link = LinkConfig(distance, Environment(sec.get("environment", "IndoorRoom")))
    except ValueError as exc:
        raise ConfigError(f"trace: {exc}") from None
    rng = np.random.default_rng(_seed(args, cfg))
    lead, tail = int(sec["lead_ms"]), int(sec["tail_ms"])
    ep = sample_episode(scenario, distance, rng, onset_ms=lead, dists=cfgmod.distributions(cfg))
    trace = render_trace([ep], link, rng, duration_ms=lead + ep.duration_ms + tail)
    out = Path(args.out)
    meta = {k: (v.value if hasattr(v, "value") else v) for k, v in vars(ep).items()}
    return [csvio.write_trace(out / "trace.csv", trace), _write_json(out / "episode.json", meta)]


def cmd_simulate(args, cfg) -> list[Path]:
    log = run(cfgmod.scenario(cfg, _seed(args, cfg)))
    return log.export(args.out)


def cmd_sweep(args, cfg) -> list[Path]:
    sec = cfg["sweep"]
    trials = args.trials if args.trials is not None else int(sec["trials"])
    if trials < 1 or args.jobs < 1:
        raise ConfigError("--trials and --jobs must be >= 1")
    table = harness.accuracy_sweep(
        sec["t_drop_ms"], sec["t_recovery_ms"], trials, seed=_seed(args, cfg),
        distance_m=float(sec["distance_m"]), jobs=args.jobs, dists=cfgmod.distributions(cfg),
        sliding_drop_window=bool(sec.get("sliding_drop_window", True)))
    out = Path(args.out)
    summary = {"distance_m": table.distance_m, "trials_per_cell": trials, "seed": table.seed,
               "rows": [dict(zip(harness.AccuracyRow.HEADER, r.as_row())) for r in table.rows]}
    return [table.write_csv(out / "accuracy.csv"), _write_json(out / "accuracy.json", summary)]


def cmd_replay(args, cfg) -> list[Path]:
    path = Path(args.trace)
    if not path.is_file():
        raise ConfigError(f"trace file not found: {path}")
    try:
        result = harness.replay(path, cfgmod.detector(cfg))
    except csvio.TraceFormatError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    out = Path(args.out)
    summary = {"trace": str(path), "samples": result.n_samples, "events": len(result.events),
               "verdicts": result.verdicts}
    return [csvio.write_events(out / "events.csv", result.events),
            _write_json(out / "replay.json", summary)]


def cmd_timing_summary(args, cfg) -> list[Path]:
    trials = args.trials if args.trials is not None else int(cfg["timing"]["trials"])
    if trials < 1:
        raise ConfigError("--trials must be >= 1")
    rows = harness.timing_summary(trials, seed=_seed(args, cfg), dists=cfgmod.distributions(cfg))
    return [harness.write_timing_csv(Path(args.out) / "timing.csv", rows)]


COMMANDS = {
    "gen-trace": cmd_gen_trace,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "replay": cmd_replay,
    "timing-summary": cmd_timing_summary,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        cfg = cfgmod.load(args.config, args.overrides)
        cfgmod.handoff(cfg)  # surface bad detector/handoff values whatever the command
        written = COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for path in written:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
