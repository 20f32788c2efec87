"""Monte-Carlo experiments over the generator, detector and simulator."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from picocell60 import csvio
from picocell60.detector import (
    BlockageDetector,
    DetectorConfig,
    DetectorEvent,
    EventKind,
    Verdict,
    centroids_for,
)
from picocell60.distributions import (
    BUCKETS_M,
    SCENARIOS,
    EpisodeDistributions,
    TimingStat,
    default_distributions,
    nearest_bucket,
)
from picocell60.handoff import HandoffConfig
from picocell60.link_model import LinkConfig, render_trace, sample_episode

LEAD_MS = 1000  # clean link before every synthetic episode


# -- detection accuracy -----------------------------------------------------

@dataclass(frozen=True)
class AccuracyRow:
    t_drop_threshold_ms: int
    t_recovery_threshold_ms: int
    a_p: float
    a_t: float
    a_t_transient: float
    a_t_nlos: float
    n_permanent: int
    n_transient: int
    n_nlos: int
    unclassified: int

    HEADER = ("t_D_th_ms", "t_R_th_ms", "A_P", "A_T", "A_T_transient", "A_T_nlos",
              "n_permanent", "n_transient", "n_nlos", "unclassified")

    def as_row(self) -> list:
        return [self.t_drop_threshold_ms, self.t_recovery_threshold_ms,
                f"{self.a_p:.4f}", f"{self.a_t:.4f}", f"{self.a_t_transient:.4f}",
                f"{self.a_t_nlos:.4f}", self.n_permanent, self.n_transient, self.n_nlos,
                self.unclassified]


@dataclass
class AccuracyTable:
    rows: list[AccuracyRow]
    distance_m: float
    trials_per_cell: int
    seed: int

    def cell(self, t_d: int, t_r: int) -> AccuracyRow:
        for r in self.rows:
            if (r.t_drop_threshold_ms, r.t_recovery_threshold_ms) == (t_d, t_r):
                return r
        raise KeyError((t_d, t_r))

    def write_csv(self, path) -> Path:
        return csvio.write_table(path, AccuracyRow.HEADER, (r.as_row() for r in self.rows))


@dataclass(frozen=True)
class _TrialJob:
    scenario: int
    trial: int
    seed: int
    distance_m: float
    cells: tuple[tuple[int, int], ...]
    dists: EpisodeDistributions
    sliding: bool


def first_verdict(cfg: DetectorConfig, q: Sequence[int]) -> Verdict | None:
    det = BlockageDetector(cfg)
    for t, v in enumerate(q):
        ev = det.step(t, v)
        if ev is not None and ev.kind is EventKind.CLASSIFIED:
            return ev.result.verdict
    return None


def _run_trial(job: _TrialJob) -> list[Verdict | None]:
    rng = np.random.default_rng([job.seed, job.scenario, job.trial])
    ep = sample_episode(job.scenario, job.distance_m, rng, onset_ms=LEAD_MS, dists=job.dists)
    longest = max(d + r for d, r in job.cells)
    n = LEAD_MS + ep.drop_time_ms + longest + 1000
    q = render_trace([ep], LinkConfig(job.distance_m), rng, duration_ms=n).q.tolist()
    cents = centroids_for(job.distance_m, job.dists)
    out = []
    for t_d, t_r in job.cells:
        cfg = DetectorConfig(t_d, t_r, centroids=cents, sliding_drop_window=job.sliding)
        out.append(first_verdict(cfg, q))
    return out


def accuracy_sweep(t_drop_list: Sequence[int], t_recovery_list: Sequence[int], trials_per_cell: int,
                   seed: int = 7, distance_m: float = 7.0, jobs: int = 1,
                   dists: EpisodeDistributions | None = None,
                   sliding_drop_window: bool = True) -> AccuracyTable:
    """Detection accuracy over a threshold grid.

    Every cell sees the same synthetic traces: trial ``i`` of scenario ``s``
    is drawn from ``default_rng([seed, s, i])``, so results do not depend on
    ``jobs`` or on execution order.  A_P counts permanent (no NLOS) trials
    judged long-term; A_T pools transient and NLOS trials judged short-term.
    """
    if not t_drop_list or not t_recovery_list:
        raise ValueError("threshold lists must be non-empty")
    if trials_per_cell < 1:
        raise ValueError("trials_per_cell must be >= 1")
    dists = dists or default_distributions()
    cells = tuple((int(d), int(r)) for d in t_drop_list for r in t_recovery_list)
    work = [_TrialJob(s, i, seed, distance_m, cells, dists, sliding_drop_window)
            for s in SCENARIOS for i in range(trials_per_cell)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_trial, work, chunksize=max(1, len(work) // (4 * jobs))))
    else:
        results = [_run_trial(w) for w in work]

    by_scenario = {s: [] for s in SCENARIOS}
    for w, verdicts in zip(work, results):
        by_scenario[w.scenario].append(verdicts)

    rows = []
    for k, (t_d, t_r) in enumerate(cells):
        v = {s: [res[k] for res in by_scenario[s]] for s in SCENARIOS}
        n = trials_per_cell
        hits_p = sum(x is Verdict.LONG_TERM for x in v[2])
        hits_1 = sum(x is Verdict.SHORT_TERM for x in v[1])
        hits_3 = sum(x is Verdict.SHORT_TERM for x in v[3])
        rows.append(AccuracyRow(
            t_d, t_r, hits_p / n, (hits_1 + hits_3) / (2 * n), hits_1 / n, hits_3 / n,
            n, n, n, sum(x is None for s in SCENARIOS for x in v[s])))
    return AccuracyTable(rows, distance_m, trials_per_cell, seed)


# -- throughput disruption --------------------------------------------------

@dataclass
class DisruptionStats:
    distance_m: float
    durations_ms: np.ndarray
    n_trials: int
    fraction: float

    @property
    def mean_ms(self) -> float:
        return float(self.durations_ms.mean()) if self.durations_ms.size else float("nan")

    @property
    def n_undisrupted(self) -> int:
        return self.n_trials - int(self.durations_ms.size)

    def ecdf(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.sort(self.durations_ms)
        return x, np.arange(1, x.size + 1) / x.size

    def write_csv(self, path) -> Path:
        x, y = self.ecdf()
        return csvio.write_table(path, ("duration_ms", "cdf"),
                                 ((int(a), f"{b:.6f}") for a, b in zip(x, y)))


def disruption_stats(n_trials: int, distance_m: float, seed: int = 7, fraction: float = 0.5,
                     dists: EpisodeDistributions | None = None) -> DisruptionStats:
    """Time each transient blockage keeps throughput below ``fraction`` of its pre-blockage level.

    Episodes whose throughput never dips that far are counted in
    ``n_undisrupted`` and left out of the durations.
    """
    if float(distance_m) not in BUCKETS_M:
        raise ValueError(f"distance {distance_m} m is not a calibrated bucket {BUCKETS_M}")
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    dists = dists or default_distributions()
    link = LinkConfig(float(distance_m))
    out = []
    for i in range(n_trials):
        rng = np.random.default_rng([seed, 4, i])
        ep = sample_episode(1, distance_m, rng, onset_ms=LEAD_MS, dists=dists)
        tr = render_trace([ep], link, rng, duration_ms=LEAD_MS + ep.duration_ms + 500)
        pre = tr.throughput_mbps[LEAD_MS - 1]
        below = int((tr.throughput_mbps < fraction * pre).sum())
        if below > 0:
            out.append(below)
    return DisruptionStats(float(distance_m), np.array(out, dtype=np.int64), n_trials, fraction)


# -- timing tables ----------------------------------------------------------

@dataclass(frozen=True)
class TimingRow:
    scenario: int
    distance_m: float
    n: int
    t_drop_mean_ms: float
    t_drop_max_ms: float
    t_recovery_mean_ms: float | None
    t_recovery_max_ms: float | None
    dq_drop_mean: float
    dq_rise_mean: float

    HEADER = ("scenario", "distance_m", "n", "t_D_mean_ms", "t_D_max_ms", "t_R_mean_ms",
              "t_R_max_ms", "dq_D_mean", "dq_R_mean")

    def as_row(self) -> list:
        def f(v):
            return "NA" if v is None else f"{v:.3f}"
        return [self.scenario, f"{self.distance_m:g}", self.n, f(self.t_drop_mean_ms),
                f(self.t_drop_max_ms), f(self.t_recovery_mean_ms), f(self.t_recovery_max_ms),
                f(self.dq_drop_mean), f(self.dq_rise_mean)]


def timing_summary(n_trials: int, seed: int = 7,
                   dists: EpisodeDistributions | None = None) -> list[TimingRow]:
    """Re-estimate the timing table from ``n_trials`` sampled episodes per cell."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    dists = dists or default_distributions()
    rows = []
    for s in SCENARIOS:
        for b in BUCKETS_M:
            rng = np.random.default_rng([seed, 5, s, int(b)])
            eps = [sample_episode(s, b, rng, q_initial=9.0, dists=dists) for _ in range(n_trials)]
            td = np.array([e.drop_time_ms for e in eps], dtype=float)
            tr = None if s == 2 else np.array([e.recovery_time_ms for e in eps], dtype=float)
            rows.append(TimingRow(
                s, b, n_trials, float(td.mean()), float(td.max()),
                None if tr is None else float(tr.mean()), None if tr is None else float(tr.max()),
                float(np.mean([e.dq_drop for e in eps])), float(np.mean([e.dq_rise for e in eps]))))
    return rows


def write_timing_csv(path, rows: Sequence[TimingRow]) -> Path:
    return csvio.write_table(path, TimingRow.HEADER, (r.as_row() for r in rows))


# -- replay -----------------------------------------------------------------

@dataclass
class ReplayResult:
    events: list[DetectorEvent]
    n_samples: int
    verdicts: dict[str, int] = field(default_factory=dict)


def replay(trace_csv, cfg: DetectorConfig | None = None) -> ReplayResult:
    """Run the streaming detector over a recorded trace file."""
    trace = csvio.read_trace(trace_csv)
    det = BlockageDetector(cfg or DetectorConfig())
    events = det.feed(trace.t_ms.tolist(), trace.q.tolist())
    verdicts: dict[str, int] = {}
    for ev in events:
        if ev.kind is EventKind.CLASSIFIED:
            verdicts[ev.result.verdict.value] = verdicts.get(ev.result.verdict.value, 0) + 1
    return ReplayResult(events, len(trace), verdicts)


# -- link death under permanent blockage ------------------------------------

def disconnection_stats(n_trials: int, seed: int = 7, distance_m: float = 7.0,
                        onset_ms: int = 1000, dists: EpisodeDistributions | None = None) -> np.ndarray:
    """Simulated time from permanent-blockage onset until throughput hits zero.

    One STA, one AP, handoffs disabled so the blocked link is simply watched
    until it dies.  Returns the logged times (ms) of the trials where it did.
    """
    from picocell60.sim import ApSpec, BlockageSpec, ScenarioConfig, StaSpec, Waypoint, run

    dists = dists or default_distributions()
    bucket = nearest_bucket(distance_m)
    cal = dists.entries[(2, bucket)]
    horizon = cal.t_disconnect.max_ms if cal.t_disconnect else cal.dwell.max_ms
    # the person stays put past the latest possible link death
    stay = max(20000.0, horizon + 1000.0)
    entries = dict(dists.entries)
    entries[(2, bucket)] = replace(cal, dwell=TimingStat(stay, stay))
    dists = EpisodeDistributions(entries, dists.dq_spread)
    observe = HandoffConfig(corner_rule=False, blockage_handoff=False)
    out = []
    for i in range(n_trials):
        cfg = ScenarioConfig(
            duration_ms=int(onset_ms + horizon + 1000),
            aps=(ApSpec("AP1", (0.0, 0.0, 0.0)),),
            stas=(StaSpec("STA1", (Waypoint(0, (float(distance_m), 0.0, 0.0)),), "AP1"),),
            blockage_events=(BlockageSpec("STA1", 2, onset_ms),),
            handoff=observe, distributions=dists, seed=seed * 1_000_003 + i)
        out.extend(d.t_dc_ms for d in run(cfg).disconnections)
    return np.array(out, dtype=np.int64)
