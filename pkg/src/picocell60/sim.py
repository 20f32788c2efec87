"""Fixed 1 ms tick engine: APs, mobile STAs, walls, blockage episodes, interference.

Each tick, every STA's serving link gets a quality from distance, azimuth,
wall occlusion and any blockage episode attached to that link.  The sample
goes to the STA's handoff controller, and the controller's mode decides what
the STA actually sees on the next tick (link down while switching, a ramp
while associating).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Hashable, Mapping, Sequence

import numpy as np

from picocell60.detector import DetectorEvent
from picocell60.distributions import EpisodeDistributions, default_distributions
from picocell60.handoff import ApSnapshot, HandoffConfig, HandoffController, HandoffRecord, Mode
from picocell60.link_model import (
    BlockageEpisode,
    Environment,
    LinkConfig,
    Trace,
    baseline_quality,
    episode_profile,
    sample_association_ms,
    sample_episode,
    throughput_of,
)

Vec3 = tuple[float, float, float]


class ConfigError(ValueError):
    """Scenario description is malformed."""


class Geometry(str, Enum):
    DEAF = "DeafScenario1"
    MUTUAL_SENSE = "MutualSenseScenario2"


@dataclass(frozen=True)
class ApSpec:
    id: str
    position: Vec3
    boresight_deg: float = 0.0
    environment: Environment = Environment.INDOOR_ROOM


@dataclass(frozen=True)
class Waypoint:
    t_ms: int
    position: Vec3


@dataclass(frozen=True)
class StaSpec:
    id: str
    path: tuple[Waypoint, ...]
    initial_ap: str | None = None
    traffic_active: bool = True
    initial_association: bool = False  # ramp up at t=0 instead of starting connected


@dataclass(frozen=True)
class Wall:
    """Axis-aligned wall segment in the x-y plane; ``openings`` are (from, to) metres along it."""

    start: tuple[float, float]
    end: tuple[float, float]
    openings: tuple[tuple[float, float], ...] = ()


@dataclass(frozen=True)
class BlockageSpec:
    sta_id: str
    scenario: int
    onset_ms: int


@dataclass(frozen=True)
class AutoBlockage:
    """Poisson blockage onsets per STA; scenario drawn with ``weights``."""

    rate_per_min: float
    weights: tuple[float, float, float] = (1.0, 1.0, 1.0)


@dataclass(frozen=True)
class InterferenceSpec:
    geometry: Geometry
    victim_sta: str
    active_from_ms: int
    active_until_ms: int | None = None
    deaf_mean: float = 0.25
    deaf_sd: float = 0.2
    sense_factor: float = 0.85
    coherence_ms: int = 100


@dataclass(frozen=True)
class ScenarioConfig:
    duration_ms: int
    aps: tuple[ApSpec, ...]
    stas: tuple[StaSpec, ...]
    walls: tuple[Wall, ...] = ()
    blockage_events: tuple[BlockageSpec, ...] = ()
    auto_blockage: AutoBlockage | None = None
    interference: InterferenceSpec | None = None
    handoff: HandoffConfig = field(default_factory=HandoffConfig)
    distributions: EpisodeDistributions = field(default_factory=default_distributions)
    rescan_ms: int = 1000
    seed: int = 7

    def validate(self) -> None:
        if self.duration_ms <= 0:
            raise ConfigError("duration_ms must be > 0")
        if not self.aps:
            raise ConfigError("at least one AP is required")
        ap_ids = [a.id for a in self.aps]
        sta_ids = [s.id for s in self.stas]
        for kind, ids in (("AP", ap_ids), ("STA", sta_ids)):
            if len(set(ids)) != len(ids):
                raise ConfigError(f"duplicate {kind} ids: {ids}")
        for sta in self.stas:
            if not sta.path:
                raise ConfigError(f"STA {sta.id} has an empty path")
            times = [w.t_ms for w in sta.path]
            if any(b <= a for a, b in zip(times, times[1:])):
                raise ConfigError(f"STA {sta.id}: waypoint times must increase")
            if sta.initial_ap is not None and sta.initial_ap not in ap_ids:
                raise ConfigError(f"STA {sta.id}: unknown initial_ap {sta.initial_ap!r}")
        for ev in self.blockage_events:
            if ev.sta_id not in sta_ids:
                raise ConfigError(f"blockage event for unknown STA {ev.sta_id!r}")
            if ev.scenario not in (1, 2, 3):
                raise ConfigError(f"unknown blockage scenario {ev.scenario!r}")
            if not 0 <= ev.onset_ms < self.duration_ms:
                raise ConfigError(f"blockage onset {ev.onset_ms} outside the run")
        if self.interference is not None:
            inter = self.interference
            if inter.victim_sta not in sta_ids:
                raise ConfigError(f"interference victim {inter.victim_sta!r} is not a STA")
            if not 0 < inter.deaf_mean < 1 or inter.deaf_sd <= 0:
                raise ConfigError("deaf_mean must lie in (0, 1) and deaf_sd be positive")
            if inter.deaf_sd ** 2 >= inter.deaf_mean * (1 - inter.deaf_mean):
                raise ConfigError("deaf_sd too large for a Beta factor with that mean")
            if inter.coherence_ms <= 0:
                raise ConfigError("coherence_ms must be positive")
        if self.rescan_ms <= 0:
            raise ConfigError("rescan_ms must be positive")


# -- geometry ---------------------------------------------------------------

def sta_position(path: Sequence[Waypoint], t_ms: float) -> Vec3:
    """Piecewise-linear position along ``path``, clamped at both ends."""
    if not path:
        raise ValueError("empty path")
    if t_ms <= path[0].t_ms:
        return tuple(map(float, path[0].position))
    for a, b in zip(path, path[1:]):
        if t_ms <= b.t_ms:
            f = (t_ms - a.t_ms) / (b.t_ms - a.t_ms)
            return tuple(float(pa + f * (pb - pa)) for pa, pb in zip(a.position, b.position))
    return tuple(map(float, path[-1].position))


def _cross(ox, oy, ax, ay, bx, by):
    return (ax - ox) * (by - oy) - (ay - oy) * (bx - ox)


def wall_occlusion(sta_pos: Sequence[float], ap_pos: Sequence[float], walls: Sequence[Wall]) -> bool:
    """True when the straight path between the two points crosses solid wall."""
    px, py = sta_pos[0], sta_pos[1]
    qx, qy = ap_pos[0], ap_pos[1]
    for w in walls:
        (ax, ay), (bx, by) = w.start, w.end
        length = math.hypot(bx - ax, by - ay)
        if length == 0:
            continue
        d1 = _cross(ax, ay, bx, by, px, py)
        d2 = _cross(ax, ay, bx, by, qx, qy)
        d3 = _cross(px, py, qx, qy, ax, ay)
        d4 = _cross(px, py, qx, qy, bx, by)
        if not (d1 * d2 < 0 and d3 * d4 < 0):
            continue
        # position of the crossing along the wall, in metres from its start
        s = d3 / (d3 - d4) * length
        if not any(lo <= s <= hi for lo, hi in w.openings):
            return True
    return False


def _bearing_offset(ap: ApSpec, pos: Vec3) -> float:
    bearing = math.degrees(math.atan2(pos[1] - ap.position[1], pos[0] - ap.position[0]))
    return (bearing - ap.boresight_deg) % 360.0


def predicted_quality(ap: ApSpec, pos: Vec3, walls: Sequence[Wall], traffic_active=True) -> float:
    """Unobstructed quality an AP would offer at ``pos`` (0 behind a wall)."""
    if wall_occlusion(pos, ap.position, walls):
        return 0.0
    dist = max(math.dist(pos, ap.position), 1e-3)
    cfg = LinkConfig(dist, ap.environment, traffic_active, _bearing_offset(ap, pos))
    return baseline_quality(cfg)


# -- interference -----------------------------------------------------------

def _beta_params(mean: float, sd: float) -> tuple[float, float]:
    k = mean * (1 - mean) / sd ** 2 - 1
    return mean * k, (1 - mean) * k


def apply_interference(primary_q: float, geometry: Geometry | str | None, interferer_active: bool,
                       rng: np.random.Generator | None = None,
                       spec: InterferenceSpec | None = None) -> float:
    """Throughput multiplier for the victim link.

    A deaf interferer collides freely, so the factor is a heavy-spread Beta
    draw around ``deaf_mean``.  A transmitter that can sense the victim
    mostly defers, costing a fixed small share.
    """
    if not interferer_active or geometry is None or primary_q <= 0:
        return 1.0  # nothing to degrade
    geometry = Geometry(geometry)
    deaf_mean = spec.deaf_mean if spec else 0.25
    deaf_sd = spec.deaf_sd if spec else 0.2
    if geometry is Geometry.MUTUAL_SENSE:
        return spec.sense_factor if spec else 0.85
    if rng is None:
        return deaf_mean
    return float(rng.beta(*_beta_params(deaf_mean, deaf_sd)))


# -- log --------------------------------------------------------------------

@dataclass
class Disconnection:
    sta_id: str
    ap_id: str
    onset_ms: int
    t_dc_ms: int


@dataclass
class SimLog:
    duration_ms: int
    traces: dict[str, Trace]
    serving: dict[str, list]  # per STA: (t_ms, ap id or None) at every change
    events: dict[str, list[DetectorEvent]]
    handoffs: dict[str, list[HandoffRecord]]
    episodes: list[tuple[str, str, BlockageEpisode]]
    disconnections: list[Disconnection]
    aborted_handoffs: dict[str, int]
    ignored_samples: dict[str, int]
    interference: dict[str, Any] | None = None

    def summary(self) -> dict[str, Any]:
        t_dc = [d.t_dc_ms for d in self.disconnections]
        out: dict[str, Any] = {
            "duration_ms": self.duration_ms,
            "stas": {},
            "t_dc_ms": t_dc,
            "t_dc_mean_ms": float(np.mean(t_dc)) if t_dc else None,
        }
        for sid, tr in self.traces.items():
            tp = tr.throughput_mbps
            out["stas"][sid] = {
                "mean_throughput_mbps": float(tp.mean()) if len(tp) else 0.0,
                "handoffs": len(self.handoffs[sid]),
                "handoff_triggers": [h.trigger.value for h in self.handoffs[sid]],
                "aborted_handoffs": self.aborted_handoffs[sid],
                "ignored_samples": self.ignored_samples[sid],
                "detector_events": len(self.events[sid]),
                "final_ap": self.serving[sid][-1][1] if self.serving[sid] else None,
            }
        if self.interference is not None:
            out["interference"] = self.interference
        return out

    def export(self, out_dir: str | Path) -> list[Path]:
        from picocell60 import csvio

        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for sid, tr in self.traces.items():
            written.append(csvio.write_trace(out / f"trace_{sid}.csv", tr))
            written.append(csvio.write_events(out / f"events_{sid}.csv", self.events[sid]))
            written.append(csvio.write_handoffs(out / f"handoffs_{sid}.csv", self.handoffs[sid]))
        path = out / "summary.json"
        csvio.atomic_write_text(path, json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")
        written.append(path)
        return written


# -- engine -----------------------------------------------------------------

class _Link:
    """Per (STA, AP) precomputed quality, wall collapse applied."""

    def __init__(self, sta: StaSpec, ap: ApSpec, positions: list[Vec3], walls):
        cache: dict[Vec3, tuple[float, bool]] = {}
        base = np.empty(len(positions))
        occluded = np.zeros(len(positions), dtype=bool)
        for t, pos in enumerate(positions):
            hit = cache.get(pos)
            if hit is None:
                occ = wall_occlusion(pos, ap.position, walls)
                dist = max(math.dist(pos, ap.position), 1e-3)
                q = baseline_quality(
                    LinkConfig(dist, ap.environment, sta.traffic_active, _bearing_offset(ap, pos)))
                hit = cache[pos] = (q, occ)
            base[t], occluded[t] = hit
        # no penetration: half on the first occluded tick, gone from the second
        collapse = np.ones(len(positions))
        collapse[occluded] = 0.5
        both = occluded.copy()
        both[1:] &= occluded[:-1]
        both[0] = False
        collapse[both] = 0.0
        self.predicted = np.where(occluded, 0.0, base)
        self.q = base * collapse


class _Overlay:
    def __init__(self, episode: BlockageEpisode, profile: np.ndarray, ap_id: str):
        self.episode = episode
        self.profile = profile
        self.ap_id = ap_id
        self.onset = episode.onset_ms
        self.end = episode.onset_ms + len(profile)
        self.dead_logged = False

    def scale(self, t_ms: int) -> float:
        if self.episode.q_initial <= 0:
            return 0.0
        return float(self.profile[t_ms - self.onset]) / self.episode.q_initial


def _auto_onsets(spec: AutoBlockage, duration_ms: int, rng: np.random.Generator):
    if spec.rate_per_min <= 0:
        return []
    w = np.asarray(spec.weights, dtype=float)
    p = w / w.sum()
    t = 0.0
    out = []
    while True:
        t += rng.exponential(60000.0 / spec.rate_per_min)
        if t >= duration_ms:
            return out
        out.append((int(t), int(rng.choice(3, p=p)) + 1))


class _StaRun:
    def __init__(self, idx: int, sta: StaSpec, cfg: ScenarioConfig):
        self.sta = sta
        self.cfg = cfg
        n = cfg.duration_ms
        self.rng = np.random.default_rng([cfg.seed, 1, idx])
        self.positions = [tuple(sta_position(sta.path, t)) for t in range(n)]
        self.links = {ap.id: _Link(sta, ap, self.positions, cfg.walls) for ap in cfg.aps}
        self.ap_order = [ap.id for ap in cfg.aps]
        self.ctl = HandoffController(cfg.handoff, self._candidates, self._ramp)
        self.t = 0
        self.pending_ap: str | None = None
        self.assoc_start = 0
        self.next_scan = 0
        onsets = [(ev.onset_ms, ev.scenario) for ev in cfg.blockage_events if ev.sta_id == sta.id]
        if cfg.auto_blockage is not None:
            onsets += _auto_onsets(cfg.auto_blockage, n, np.random.default_rng([cfg.seed, 2, idx]))
        self.onsets = sorted(onsets)
        self.overlays: list[_Overlay] = []
        self.episodes: list[tuple[str, str, BlockageEpisode]] = []
        self.disconnections: list[Disconnection] = []
        self.q = np.zeros(n, dtype=np.int64)
        self.tp = np.zeros(n, dtype=np.int64)
        self.serving: list = []

        if sta.initial_ap is not None:
            ramp = self._ramp_to(sta.initial_ap, 0) if sta.initial_association else 0
            self.ctl.associate(sta.initial_ap, 0, ramp)
            self.pending_ap = sta.initial_ap

    def _candidates(self, t_ms):
        return [ApSnapshot(a, float(self.links[a].predicted[t_ms])) for a in self.ap_order
                if self.links[a].predicted[t_ms] > 0]

    def _ramp_to(self, ap_id: str, t_ms: int) -> int:
        dist = math.dist(self.positions[t_ms], next(a.position for a in self.cfg.aps if a.id == ap_id))
        return sample_association_ms(self.rng, max(dist, 1e-3))

    def _ramp(self) -> int:
        return self._ramp_to(self.ctl.state.pending_ap, self.t)

    def _start_episodes(self, t: int) -> None:
        st = self.ctl.state
        while self.onsets and self.onsets[0][0] <= t:
            _, scenario = self.onsets.pop(0)
            ap = st.current_ap
            if ap is None or any(o.ap_id == ap and o.end > t for o in self.overlays):
                continue
            q_now = float(self.links[ap].q[t])
            if q_now <= 0:
                continue
            dist = max(math.dist(self.positions[t], next(a.position for a in self.cfg.aps if a.id == ap)), 1e-3)
            ep = sample_episode(scenario, dist, self.rng, onset_ms=t, q_initial=min(q_now, 10.0),
                                dists=self.cfg.distributions)
            self.overlays.append(_Overlay(ep, episode_profile(ep, self.rng), ap))
            self.episodes.append((self.sta.id, ap, ep))

    def _link_q(self, ap_id: str, t: int) -> tuple[float, _Overlay | None]:
        q = float(self.links[ap_id].q[t])
        for o in self.overlays:
            if o.ap_id == ap_id and o.onset <= t < o.end:
                return q * o.scale(t), o
        return q, None

    def tick(self, t: int, factor_fn) -> None:
        self.t = t
        ctl, st = self.ctl, self.ctl.state
        self._start_episodes(t)
        overlay = None
        if st.mode in (Mode.ASSOCIATED, Mode.CHARACTERIZING):
            q, overlay = self._link_q(st.current_ap, t)
        elif st.mode is Mode.ASSOCIATING:
            base, _ = self._link_q(st.pending_ap, t)
            span = max(st.ready_at_ms - self.assoc_start, 1)
            k = t - self.assoc_start
            q = base if k >= span else min(1.0 + (base - 1.5) * k / span, base)
        else:
            q = 0.0
        q_int = int(min(max(math.floor(q + 0.5), 0), 10))
        serving_ap = st.current_ap
        tp = throughput_of(q_int)
        if serving_ap is not None:
            tp *= factor_fn(q_int, t)
        self.q[t] = q_int
        self.tp[t] = int(tp)

        if overlay is not None and not overlay.dead_logged and self.tp[t] == 0 and overlay.episode.scenario == 2:
            overlay.dead_logged = True
            self.disconnections.append(Disconnection(self.sta.id, overlay.ap_id, overlay.onset, t - overlay.onset))

        prev_mode = st.mode
        ctl.on_sample(t, q_int)
        if st.mode is Mode.ASSOCIATING and prev_mode is not Mode.ASSOCIATING:
            self.assoc_start = t
        if st.mode is Mode.DISCONNECTED and t >= self.next_scan:
            self.next_scan = t + self.cfg.rescan_ms
            cands = self._candidates(t)
            if cands:
                best = min(cands, key=lambda c: (-c.predicted_q, c.ap_id)).ap_id
                ctl.associate(best, t, self._ramp_to(best, t))
                self.assoc_start = t
        if not self.serving or self.serving[-1][1] != st.current_ap:
            self.serving.append((t, st.current_ap))


def run(cfg: ScenarioConfig) -> SimLog:
    """Simulate the scenario tick by tick; deterministic in ``cfg.seed``."""
    cfg.validate()
    stas = [_StaRun(i, s, cfg) for i, s in enumerate(cfg.stas)]
    inter = cfg.interference
    irng = np.random.default_rng([cfg.seed, 3])
    block = {"idx": None, "factor": 1.0}

    def active(t):
        return inter is not None and t >= inter.active_from_ms and (
            inter.active_until_ms is None or t < inter.active_until_ms)

    def victim_factor(q, t):
        if not active(t):
            return 1.0
        idx = t // inter.coherence_ms
        if block["idx"] != idx:
            block["idx"] = idx
            block["factor"] = apply_interference(1.0, inter.geometry, True, irng, inter)
        return block["factor"]

    def neutral(q, t):
        return 1.0

    for t in range(cfg.duration_ms):
        for run_ in stas:
            fn = victim_factor if inter is not None and run_.sta.id == inter.victim_sta else neutral
            run_.tick(t, fn)

    inter_summary = None
    if inter is not None:
        tp = next(r for r in stas if r.sta.id == inter.victim_sta).tp
        end = inter.active_until_ms or cfg.duration_ms
        before = tp[:inter.active_from_ms]
        during = tp[inter.active_from_ms:end]
        inter_summary = {
            "geometry": inter.geometry.value,
            "victim_sta": inter.victim_sta,
            "mean_before_mbps": float(before.mean()) if len(before) else None,
            "mean_during_mbps": float(during.mean()) if len(during) else None,
        }

    return SimLog(
        duration_ms=cfg.duration_ms,
        traces={r.sta.id: Trace(0, r.q, r.tp) for r in stas},
        serving={r.sta.id: r.serving for r in stas},
        events={r.sta.id: list(r.ctl.events) for r in stas},
        handoffs={r.sta.id: list(r.ctl.records) for r in stas},
        episodes=[e for r in stas for e in r.episodes],
        disconnections=[d for r in stas for d in r.disconnections],
        aborted_handoffs={r.sta.id: r.ctl.state.aborted_handoffs for r in stas},
        ignored_samples={r.sta.id: r.ctl.state.ignored_samples for r in stas},
        interference=inter_summary,
    )


# -- construction from plain mappings ---------------------------------------

def _vec3(v) -> Vec3:
    v = list(v)
    if len(v) == 2:
        v.append(0.0)
    if len(v) != 3:
        raise ConfigError(f"position needs 2 or 3 coordinates, got {v}")
    return tuple(float(c) for c in v)


def _path(raw) -> tuple[Waypoint, ...]:
    """Waypoints give either ``t_ms`` or a ``speed_mps`` to reach them from the previous one."""
    if not raw:
        raise ConfigError("STA path is empty")
    out: list[Waypoint] = []
    for i, w in enumerate(raw):
        pos = _vec3(w["position"])
        if "t_ms" in w:
            t = int(w["t_ms"])
        elif i == 0:
            t = 0
        elif "speed_mps" in w:
            speed = float(w["speed_mps"])
            if speed <= 0:
                raise ConfigError("speed_mps must be positive")
            t = out[-1].t_ms + int(round(math.dist(pos, out[-1].position) / speed * 1000))
        else:
            raise ConfigError(f"waypoint {i} needs t_ms or speed_mps")
        out.append(Waypoint(t, pos))
    return tuple(out)


def _known(d: Mapping, allowed: set, where: str) -> None:
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"unknown keys in {where}: {sorted(extra)}")


def scenario_from_dict(d: Mapping[str, Any], handoff: HandoffConfig | None = None,
                       dists: EpisodeDistributions | None = None, seed: int | None = None) -> ScenarioConfig:
    try:
        _known(d, {"duration_ms", "aps", "stas", "walls", "blockage_events", "auto_blockage",
                   "interference", "rescan_ms", "seed"}, "scenario")
        aps = tuple(ApSpec(str(a["id"]), _vec3(a["position"]), float(a.get("boresight_deg", 0.0)),
                           Environment(a.get("environment", "IndoorRoom"))) for a in d.get("aps", []))
        stas = tuple(StaSpec(str(s["id"]), _path(s["path"]),
                             None if s.get("initial_ap") is None else str(s["initial_ap"]),
                             bool(s.get("traffic_active", True)),
                             bool(s.get("initial_association", False))) for s in d.get("stas", []))
        walls = tuple(Wall(tuple(map(float, w["start"])), tuple(map(float, w["end"])),
                           tuple(tuple(map(float, o)) for o in w.get("openings", ())))
                      for w in d.get("walls", []))
        events = tuple(BlockageSpec(str(e["sta_id"]), int(e["scenario"]), int(e["onset_ms"]))
                       for e in d.get("blockage_events", []))
        auto = None
        if d.get("auto_blockage"):
            a = d["auto_blockage"]
            auto = AutoBlockage(float(a["rate_per_min"]), tuple(a.get("weights", (1.0, 1.0, 1.0))))
        inter = None
        if d.get("interference"):
            i = dict(d["interference"])
            i["geometry"] = Geometry(i["geometry"])
            i["victim_sta"] = str(i["victim_sta"])
            inter = InterferenceSpec(**i)
        cfg = ScenarioConfig(
            duration_ms=int(d["duration_ms"]), aps=aps, stas=stas, walls=walls,
            blockage_events=events, auto_blockage=auto, interference=inter,
            handoff=handoff or HandoffConfig(), distributions=dists or default_distributions(),
            rescan_ms=int(d.get("rescan_ms", 1000)),
            seed=int(seed if seed is not None else d.get("seed", 7)))
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad scenario config: {exc!r}") from exc
    cfg.validate()
    return cfg
