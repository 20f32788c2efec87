"""Calibration tables and the bounded samplers drawn from them.

Timings are truncated normals: standard deviation ``(max - mean) / 2`` and
support ``[mean / 4, max]``.  Because that support is lopsided around the
mean, the underlying normal's location is solved numerically so the
*truncated* mean equals the tabulated mean.  Quality drops and rises get the
same treatment against their clamps.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from statistics import NormalDist
from typing import Any, Mapping

import numpy as np
from scipy import integrate, optimize, stats

BUCKETS_M = (3.0, 7.0)
SCENARIOS = (1, 2, 3)

_STD = NormalDist()


@dataclass(frozen=True)
class TimingStat:
    """Mean and hard upper bound of a duration, in milliseconds."""

    mean_ms: float
    max_ms: float

    def __post_init__(self):
        if self.mean_ms < 0 or self.max_ms < self.mean_ms:
            raise ValueError(f"need 0 <= mean <= max, got {self.mean_ms}, {self.max_ms}")


@dataclass(frozen=True)
class ScenarioCalibration:
    t_drop: TimingStat
    t_recovery: TimingStat | None
    dq_drop: float
    dq_rise: float
    dwell: TimingStat
    hold: TimingStat | None = None
    t_disconnect: TimingStat | None = None


def _ts(mean, max_):
    return TimingStat(float(mean), float(max_))


# Transient dwell means are not measured directly; they are set so the mean
# time spent below half the pre-blockage throughput lands on 2.166 s / 1.036 s.
_DEFAULT_TABLE: dict[tuple[int, float], ScenarioCalibration] = {
    (1, 3.0): ScenarioCalibration(
        t_drop=_ts(197, 838), t_recovery=_ts(3826, 5726), dq_drop=7.5, dq_rise=7.32,
        dwell=_ts(1060, 2120)),
    (1, 7.0): ScenarioCalibration(
        t_drop=_ts(140, 513), t_recovery=_ts(1648, 2434), dq_drop=7.72, dq_rise=7.64,
        dwell=_ts(500, 1000)),
    (2, 3.0): ScenarioCalibration(
        t_drop=_ts(232, 748), t_recovery=None, dq_drop=7.20, dq_rise=1.41,
        dwell=_ts(20000, 40000)),
    (2, 7.0): ScenarioCalibration(
        t_drop=_ts(298, 952), t_recovery=None, dq_drop=7.30, dq_rise=1.56,
        dwell=_ts(20000, 40000), t_disconnect=_ts(16329, 22329)),
    (3, 3.0): ScenarioCalibration(
        t_drop=_ts(267.65, 707), t_recovery=_ts(190, 376), dq_drop=3.40, dq_rise=1.13,
        dwell=_ts(0, 0), hold=_ts(20000, 40000)),
    (3, 7.0): ScenarioCalibration(
        t_drop=_ts(411, 784), t_recovery=_ts(136, 313), dq_drop=4.06, dq_rise=1.20,
        dwell=_ts(0, 0), hold=_ts(20000, 40000)),
}


def nearest_bucket(distance_m: float) -> float:
    if distance_m <= 0:
        raise ValueError(f"distance must be positive, got {distance_m}")
    return min(BUCKETS_M, key=lambda b: (abs(b - distance_m), b))


@dataclass
class EpisodeDistributions:
    """Per (scenario, distance bucket) calibration plus the quality spread."""

    entries: dict[tuple[int, float], ScenarioCalibration] = field(
        default_factory=lambda: dict(_DEFAULT_TABLE))
    dq_spread: float = 0.7

    def __post_init__(self):
        if self.dq_spread < 0:
            raise ValueError("dq_spread must be >= 0")
        missing = {(s, b) for s in SCENARIOS for b in BUCKETS_M} - set(self.entries)
        if missing:
            raise ValueError(f"calibration table missing entries: {sorted(missing)}")
        for (s, _), cal in self.entries.items():
            if s == 2 and cal.t_recovery is not None:
                raise ValueError("scenario 2 has no recovery time")
            if s != 2 and cal.t_recovery is None:
                raise ValueError(f"scenario {s} needs a recovery time")

    def entry(self, scenario: int, distance_m: float) -> ScenarioCalibration:
        if scenario not in SCENARIOS:
            raise ValueError(f"unknown blockage scenario {scenario!r}")
        return self.entries[(scenario, nearest_bucket(distance_m))]

    def point_mass(self) -> "EpisodeDistributions":
        """Same means with every spread removed; samples become deterministic."""

        def pin(t):
            return None if t is None else TimingStat(t.mean_ms, t.mean_ms)

        entries = {
            k: replace(c, t_drop=pin(c.t_drop), t_recovery=pin(c.t_recovery),
                       dwell=pin(c.dwell), hold=pin(c.hold), t_disconnect=pin(c.t_disconnect))
            for k, c in self.entries.items()
        }
        return EpisodeDistributions(entries=entries, dq_spread=0.0)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"dq_spread": self.dq_spread}
        for (s, b), cal in sorted(self.entries.items()):
            row = {}
            for name, value in asdict(cal).items():
                if value is None:
                    continue
                if isinstance(value, dict):
                    row[f"{name}_mean_ms"] = value["mean_ms"]
                    row[f"{name}_max_ms"] = value["max_ms"]
                else:
                    row[name] = value
            out.setdefault(f"scenario_{s}", {})[f"{int(b)}m"] = row
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "EpisodeDistributions":
        """Overlay a (possibly partial) mapping onto the compiled-in defaults."""
        entries = dict(_DEFAULT_TABLE)
        for key, rows in data.items():
            if key == "dq_spread":
                continue
            if not key.startswith("scenario_"):
                raise ValueError(f"unknown episode table key {key!r}")
            scenario = int(key.removeprefix("scenario_"))
            if scenario not in SCENARIOS:
                raise ValueError(f"unknown blockage scenario {scenario!r}")
            for bucket_key, row in rows.items():
                bucket = float(str(bucket_key).rstrip("m"))
                if bucket not in BUCKETS_M:
                    raise ValueError(f"uncalibrated distance bucket {bucket_key!r}")
                entries[(scenario, bucket)] = _overlay(entries[(scenario, bucket)], row)
        return cls(entries=entries, dq_spread=float(data.get("dq_spread", 0.7)))


_TIMING_FIELDS = ("t_drop", "t_recovery", "dwell", "hold", "t_disconnect")


def _overlay(base: ScenarioCalibration, row: Mapping[str, Any]) -> ScenarioCalibration:
    changes: dict[str, Any] = {}
    pending: dict[str, list] = {}
    for key, value in row.items():
        if key in ("dq_drop", "dq_rise"):
            changes[key] = float(value)
            continue
        for idx, suffix in enumerate(("_mean_ms", "_max_ms")):
            name = key[: -len(suffix)]
            if key.endswith(suffix) and name in _TIMING_FIELDS:
                cur = getattr(base, name)
                slot = pending.setdefault(name, [cur.mean_ms, cur.max_ms] if cur else [None, None])
                slot[idx] = float(value)
                break
        else:
            raise ValueError(f"unknown calibration field {key!r}")
    for name, (mean, max_) in pending.items():
        if mean is None or max_ is None:
            raise ValueError(f"{name} needs both a mean and a max")
        changes[name] = TimingStat(mean, max_)
    return replace(base, **changes)


def default_distributions() -> EpisodeDistributions:
    return EpisodeDistributions()


# -- samplers ---------------------------------------------------------------

@lru_cache(maxsize=256)
def _timing_loc(mean: float, sd: float, lo: float, hi: float) -> float:
    def gap(loc):
        a, b = (lo - loc) / sd, (hi - loc) / sd
        return float(stats.truncnorm.mean(a, b, loc=loc, scale=sd)) - mean

    return optimize.brentq(gap, lo - 20 * sd, hi + 20 * sd, xtol=1e-9)


def truncated_timing(rng: np.random.Generator, stat: TimingStat) -> float:
    """Draw a duration with the stat's mean, never exceeding its max."""
    if stat.max_ms <= stat.mean_ms:
        return stat.mean_ms
    sd = (stat.max_ms - stat.mean_ms) / 2.0
    lo, hi = stat.mean_ms / 4.0, stat.max_ms
    loc = _timing_loc(stat.mean_ms, sd, lo, hi)
    p_lo, p_hi = _STD.cdf((lo - loc) / sd), _STD.cdf((hi - loc) / sd)
    p = p_lo + rng.random() * (p_hi - p_lo)
    p = min(max(p, 1e-15), 1 - 1e-15)
    return min(max(loc + sd * _STD.inv_cdf(p), lo), hi)


def _survival(t, loc, sd):
    return 1.0 - _STD.cdf((t - loc) / sd)


@lru_cache(maxsize=256)
def _drop_loc(target: float, sd: float, cap: float) -> float:
    # E[clip(N(loc, sd), 0, cap)] = integral of the survival function over [0, cap]
    def gap(loc):
        return integrate.quad(_survival, 0.0, cap, args=(loc, sd))[0] - target

    lo, hi = -20.0 - 20 * sd, cap + 20 + 20 * sd
    if gap(hi) <= 0:
        return hi
    if gap(lo) >= 0:
        return lo
    return optimize.brentq(gap, lo, hi, xtol=1e-9)


@lru_cache(maxsize=256)
def _rise_loc(target: float, sd: float, drop_loc: float, cap: float) -> float:
    # rise = clip(Y, 0, drop) with drop independent, so
    # E[rise] = integral over [0, cap] of S_Y(t) * S_drop(t)
    def gap(loc):
        f = lambda t: _survival(t, loc, sd) * _survival(t, drop_loc, sd)  # noqa: E731
        return integrate.quad(f, 0.0, cap)[0] - target

    lo, hi = -20.0 - 20 * sd, cap + 20 + 20 * sd
    if gap(hi) <= 0:
        return hi
    if gap(lo) >= 0:
        return lo
    return optimize.brentq(gap, lo, hi, xtol=1e-9)


def sample_quality_changes(rng: np.random.Generator, dq_drop: float, dq_rise: float | None,
                           spread: float, q_initial: float) -> tuple[float, float]:
    """Draw (drop, rise) with means (dq_drop, dq_rise) and 0 <= rise <= drop <= q_initial.

    ``dq_rise=None`` means the scenario never recovers; rise is 0.
    """
    cap = float(q_initial)
    if spread == 0:
        drop = min(max(dq_drop, 0.0), cap)
        rise = 0.0 if dq_rise is None else min(max(dq_rise, 0.0), drop)
        return drop, rise
    m_drop = _drop_loc(float(dq_drop), float(spread), cap)
    drop = float(np.clip(rng.normal(m_drop, spread), 0.0, cap))
    if dq_rise is None:
        return drop, 0.0
    m_rise = _rise_loc(float(dq_rise), float(spread), m_drop, cap)
    rise = float(np.clip(rng.normal(m_rise, spread), 0.0, drop))
    return drop, rise
