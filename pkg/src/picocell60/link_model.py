"""Table-driven 60 GHz link quality: coverage, range, throughput and blockage traces.

Quality ``q`` lives on the vendor's 0..10 scale.  Everything here is computed
on real-valued ``q`` and quantized to integers only when a trace is rendered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Sequence, Union

import numpy as np

from picocell60.distributions import (
    EpisodeDistributions,
    TimingStat,
    default_distributions,
    sample_quality_changes,
    truncated_timing,
)

Q_MAX = 10.0

# q -> Mbps before the rate cap; anchored at q=9 -> 900 and q=2 -> 250
THROUGHPUT_TABLE = np.array([0, 100, 250, 400, 550, 700, 770, 850, 900, 900, 950], dtype=np.int64)

# Association time per STA-AP distance (m): (best, worst, average) in ms
ASSOCIATION_TABLE = {
    1.0: (146.28, 386.14, 247.47),
    4.0: (153.34, 375.56, 245.4),
    10.0: (172.12, 324.58, 243.75),
}
REALIGNMENT = TimingStat(7.65, 15.0)
SPIKE_RATE_PER_S = 0.05
SPIKE_UNITS = 2.0


class Environment(str, Enum):
    INDOOR_CORRIDOR = "IndoorCorridor"
    INDOOR_ROOM = "IndoorRoom"
    OUTDOOR_OPEN = "OutdoorOpen"


class BlockageScenario(IntEnum):
    TRANSIENT = 1
    PERMANENT_NO_NLOS = 2
    PERMANENT_WITH_NLOS = 3


@dataclass(frozen=True)
class RangeProfile:
    """Quality stays at ``peak_q`` up to ``flat_m`` then falls linearly to 1 at max range."""

    flat_m: float
    max_range_m: float
    max_range_idle_m: float
    peak_q: float = 9.0

    def quality_at(self, distance_m: float, traffic_active: bool) -> float:
        reach = self.max_range_m if traffic_active else self.max_range_idle_m
        flat = self.flat_m * reach / self.max_range_m
        if distance_m > reach:
            return 0.0
        if distance_m <= flat:
            return self.peak_q
        return self.peak_q - (self.peak_q - 1.0) * (distance_m - flat) / (reach - flat)


# Corridors reach further than open space (wall reflections); idle links
# reach further than loaded ones (control PHY only).
DEFAULT_RANGES = {
    Environment.INDOOR_CORRIDOR: RangeProfile(flat_m=10.0, max_range_m=30.0, max_range_idle_m=38.0),
    Environment.INDOOR_ROOM: RangeProfile(flat_m=8.0, max_range_m=16.0, max_range_idle_m=20.0),
    Environment.OUTDOOR_OPEN: RangeProfile(flat_m=6.0, max_range_m=20.0, max_range_idle_m=26.0),
}


@dataclass(frozen=True)
class LinkConfig:
    distance_m: float
    environment: Environment = Environment.INDOOR_ROOM
    traffic_active: bool = True
    boresight_offset_deg: float = 0.0
    rate_cap_mbps: float = 1000.0

    def __post_init__(self):
        if not self.distance_m > 0:
            raise ValueError(f"distance_m must be > 0, got {self.distance_m}")
        if not self.rate_cap_mbps > 0:
            raise ValueError(f"rate_cap_mbps must be > 0, got {self.rate_cap_mbps}")
        object.__setattr__(self, "environment", Environment(self.environment))


def azimuth_gain(offset_deg: float, back_factor: float = 0.2, taper_deg: float = 20.0) -> float:
    """Relative gain for a peer ``offset_deg`` away from boresight.

    Flat 1.0 across the 180 degree front sector, linear taper of ``taper_deg``
    just outside its edges, ``back_factor`` everywhere behind.
    """
    o = math.fmod(offset_deg, 360.0)
    if o < 0:
        o += 360.0
    off_axis = min(o, 360.0 - o)
    if off_axis <= 90.0:
        return 1.0
    if taper_deg > 0 and off_axis < 90.0 + taper_deg:
        return 1.0 - (1.0 - back_factor) * (off_axis - 90.0) / taper_deg
    return back_factor


def baseline_quality(cfg: LinkConfig, ranges=DEFAULT_RANGES) -> float:
    """Unobstructed, un-quantized quality for a link."""
    q = ranges[cfg.environment].quality_at(cfg.distance_m, cfg.traffic_active)
    return min(Q_MAX, q * azimuth_gain(cfg.boresight_offset_deg))


def throughput_of(q: float, cap_mbps: float = 1000.0) -> float:
    if q < 0 or q > Q_MAX:
        raise ValueError(f"signal quality out of range: {q}")
    return float(min(THROUGHPUT_TABLE[int(math.floor(q))], cap_mbps))


def throughput_series(q: np.ndarray, cap_mbps: float = 1000.0) -> np.ndarray:
    idx = np.floor(np.asarray(q, dtype=float)).astype(np.int64)
    return np.minimum(THROUGHPUT_TABLE[idx], int(cap_mbps))


def quantize(values: np.ndarray) -> np.ndarray:
    """Round half up and clamp to the integer 0..10 scale."""
    return np.clip(np.floor(np.asarray(values, dtype=float) + 0.5), 0, Q_MAX).astype(np.int64)


# -- episodes ---------------------------------------------------------------

@dataclass(frozen=True)
class BlockageEpisode:
    scenario: BlockageScenario
    q_initial: float
    q_blocked: float
    q_final: float
    drop_time_ms: int
    recovery_time_ms: int | None
    dwell_ms: int
    onset_ms: int = 0
    hold_ms: int = 0
    disconnect_ms: int | None = None  # link death, measured from onset

    def __post_init__(self):
        object.__setattr__(self, "scenario", BlockageScenario(self.scenario))
        if not 0.0 <= self.q_blocked <= self.q_final <= self.q_initial <= Q_MAX:
            raise ValueError("need 0 <= q_blocked <= q_final <= q_initial <= 10")
        if self.drop_time_ms <= 0:
            raise ValueError("drop_time_ms must be positive")
        if self.scenario is BlockageScenario.PERMANENT_NO_NLOS:
            if self.recovery_time_ms is not None or self.q_final != self.q_blocked:
                raise ValueError("scenario 2 never recovers")
        elif self.recovery_time_ms is None or self.recovery_time_ms <= 0:
            raise ValueError(f"scenario {int(self.scenario)} needs a positive recovery time")
        if self.dwell_ms < 0 or self.hold_ms < 0:
            raise ValueError("dwell_ms and hold_ms must be >= 0")

    @property
    def dq_drop(self) -> float:
        return self.q_initial - self.q_blocked

    @property
    def dq_rise(self) -> float:
        return self.q_final - self.q_blocked

    @property
    def duration_ms(self) -> int:
        return self.drop_time_ms + self.dwell_ms + (self.recovery_time_ms or 0) + self.hold_ms

    @property
    def start_ms(self) -> int:
        return self.onset_ms


def _ms(value: float, minimum: int = 0) -> int:
    return max(minimum, int(round(value)))


def sample_episode(scenario: int, distance_m: float, rng: np.random.Generator,
                   onset_ms: int = 0, q_initial: float | None = None,
                   dists: EpisodeDistributions | None = None) -> BlockageEpisode:
    """Draw one blockage episode from the calibrated tables."""
    dists = dists or default_distributions()
    cal = dists.entry(scenario, distance_m)  # raises on unknown scenario
    scenario = BlockageScenario(scenario)
    if q_initial is None:
        q_initial = baseline_quality(LinkConfig(distance_m))
    permanent = scenario is BlockageScenario.PERMANENT_NO_NLOS

    drop, rise = sample_quality_changes(
        rng, cal.dq_drop, None if permanent else cal.dq_rise, dists.dq_spread, q_initial)
    t_drop = _ms(truncated_timing(rng, cal.t_drop), 1)
    t_rec = None if permanent else _ms(truncated_timing(rng, cal.t_recovery), 1)
    dwell = _ms(truncated_timing(rng, cal.dwell))
    hold = _ms(truncated_timing(rng, cal.hold)) if cal.hold else 0
    t_dc = _ms(truncated_timing(rng, cal.t_disconnect), 1) if cal.t_disconnect else None

    q_blocked = q_initial - drop
    return BlockageEpisode(
        scenario=scenario, q_initial=q_initial, q_blocked=q_blocked,
        q_final=min(q_blocked + rise, q_initial), drop_time_ms=t_drop, recovery_time_ms=t_rec,
        dwell_ms=dwell, onset_ms=onset_ms, hold_ms=hold, disconnect_ms=t_dc)


def episode_profile(ep: BlockageEpisode, rng: np.random.Generator | None = None) -> np.ndarray:
    """Un-quantized quality over the episode's span, one value per ms."""
    parts = [ep.q_initial - ep.dq_drop * np.arange(1, ep.drop_time_ms + 1) / ep.drop_time_ms,
             np.full(ep.dwell_ms, ep.q_blocked)]
    if ep.recovery_time_ms:
        k = np.arange(1, ep.recovery_time_ms + 1)
        parts.append(ep.q_blocked + ep.dq_rise * k / ep.recovery_time_ms)
    parts.append(np.full(ep.hold_ms, ep.q_final))
    prof = np.concatenate(parts)

    if ep.scenario is BlockageScenario.PERMANENT_NO_NLOS:
        if rng is not None and ep.dwell_ms:
            # single-sample ground-reflection spikes while the person stands
            hits = rng.random(ep.dwell_ms) < SPIKE_RATE_PER_S / 1000.0
            dwell = prof[ep.drop_time_ms:ep.drop_time_ms + ep.dwell_ms]
            dwell[hits] = np.minimum(dwell[hits] + SPIKE_UNITS, Q_MAX)
        if ep.disconnect_ms is not None and ep.disconnect_ms < len(prof):
            prof[ep.disconnect_ms:] = 0.0
    return prof


# -- segments and traces ----------------------------------------------------

@dataclass(frozen=True)
class Steady:
    start_ms: int
    duration_ms: int


@dataclass(frozen=True)
class Idle:
    """No link: q = 0."""

    start_ms: int
    duration_ms: int


@dataclass(frozen=True)
class Association:
    """First beacon at ``start_ms``; quality climbs to baseline over ``duration_ms``."""

    start_ms: int
    duration_ms: int


@dataclass(frozen=True)
class Realignment:
    """Beam knocked off at ``start_ms``; recovers to baseline within ``duration_ms``."""

    start_ms: int
    duration_ms: int
    depth: float = 4.0


Segment = Union[Steady, Idle, Association, Realignment, BlockageEpisode]


def _span(seg: Segment) -> tuple[int, int]:
    dur = seg.duration_ms
    return seg.start_ms, seg.start_ms + dur


def sample_association_ms(rng: np.random.Generator, distance_m: float = 4.0) -> int:
    """Triangular on [best, worst] with its mode placed so the mean is the measured average."""
    key = min(ASSOCIATION_TABLE, key=lambda d: (abs(d - distance_m), d))
    best, worst, avg = ASSOCIATION_TABLE[key]
    mode = 3.0 * avg - best - worst
    return int(math.ceil(rng.triangular(best, mode, worst)))


def sample_realignment_ms(rng: np.random.Generator) -> int:
    return _ms(truncated_timing(rng, REALIGNMENT), 1)


@dataclass(eq=False)
class Trace:
    start_ms: int
    q: np.ndarray
    throughput_mbps: np.ndarray | None = None

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=np.int64)
        if self.q.ndim != 1:
            raise ValueError("trace samples must be one-dimensional")
        if self.q.size and (self.q.min() < 0 or self.q.max() > Q_MAX):
            raise ValueError("trace samples must lie in 0..10")
        if self.throughput_mbps is not None:
            self.throughput_mbps = np.asarray(self.throughput_mbps, dtype=np.int64)
            if self.throughput_mbps.shape != self.q.shape:
                raise ValueError("throughput and quality lengths differ")

    def __len__(self) -> int:
        return len(self.q)

    @property
    def t_ms(self) -> np.ndarray:
        return self.start_ms + np.arange(len(self.q), dtype=np.int64)

    def identical(self, other: "Trace") -> bool:
        same_tp = (self.throughput_mbps is None and other.throughput_mbps is None) or (
            self.throughput_mbps is not None and other.throughput_mbps is not None
            and np.array_equal(self.throughput_mbps, other.throughput_mbps))
        return self.start_ms == other.start_ms and np.array_equal(self.q, other.q) and same_tp


def render_values(segments: Sequence[Segment], base: float, n: int,
                  rng: np.random.Generator | None = None) -> np.ndarray:
    """Real-valued quality for ``n`` ms starting at t=0, gaps held at ``base``."""
    spans = sorted((_span(s), i) for i, s in enumerate(segments))
    for ((_, end), _), ((start, _), _) in zip(spans, spans[1:]):
        if start < end:
            raise ValueError("segments overlap in time")
    if spans and spans[0][0][0] < 0:
        raise ValueError("segments may not start before t=0")

    out = np.full(n, float(base))
    for (start, end), i in spans:
        seg = segments[i]
        if start >= n:
            continue
        if isinstance(seg, Steady):
            vals = np.full(end - start, float(base))
        elif isinstance(seg, Idle):
            vals = np.zeros(end - start)
        elif isinstance(seg, Association):
            # starts at 1 (first registered value) and only rounds to base on the last step
            k = np.arange(seg.duration_ms)
            vals = 1.0 + (base - 1.5) * k / max(seg.duration_ms, 1)
            vals = np.minimum(vals, base)
        elif isinstance(seg, Realignment):
            k = np.arange(seg.duration_ms)
            vals = base - seg.depth * (1.0 - k / seg.duration_ms)
        else:
            vals = episode_profile(seg, rng)
        stop = min(end, n)
        out[start:stop] = vals[:stop - start]
    return np.clip(out, 0.0, Q_MAX)


def render_trace(segments: Sequence[Segment], cfg: LinkConfig,
                 rng: np.random.Generator | None = None, duration_ms: int | None = None,
                 start_ms: int = 0) -> Trace:
    """Render segments into an integer 1 ms trace with derived throughput.

    Segment times are relative to ``start_ms``.  Without ``duration_ms`` the
    trace ends with the last segment (or is empty if there are none).
    """
    if duration_ms is None:
        duration_ms = max((_span(s)[1] for s in segments), default=0)
    if duration_ms < 0:
        raise ValueError("duration_ms must be >= 0")
    base = baseline_quality(cfg)
    q = quantize(render_values(segments, base, duration_ms, rng))
    return Trace(start_ms, q, throughput_series(q, cfg.rate_cap_mbps))

