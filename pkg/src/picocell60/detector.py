"""Streaming blockage characterization: drop window, recovery window, nearest centroid.

The detector is fed one quality sample per millisecond.  A drop window of
``t_drop_threshold_ms`` measures the largest fall ``x`` below the pre-blockage
reference; if ``x`` exceeds the trigger, a recovery window of
``t_recovery_threshold_ms`` follows and measures the largest rise ``y`` above
the running minimum.  ``(x, y)`` is then matched to the nearest of three
scenario centroids.

Two windowing modes exist.  Sliding (default): the reference is the max over
the last ``reference_window_ms`` and the drop window opens at the first sample
that fell below it, so a blockage is never split across windows.  Tumbling:
back-to-back drop windows, each judged on its own, as a literal reading of the
two monitoring loops.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Sequence

import numpy as np

from picocell60.distributions import EpisodeDistributions, default_distributions, nearest_bucket


class Verdict(str, Enum):
    SHORT_TERM = "ShortTermBlockage"
    LONG_TERM = "LongTermBlockage"


class EventKind(str, Enum):
    INDICATION = "BlockageIndication"
    NO_BLOCKAGE = "NoBlockage"
    CLASSIFIED = "Classified"


class Centroid(NamedTuple):
    scenario_id: int
    x_c: float
    y_c: float


class BlockageFeatures(NamedTuple):
    x: float
    y: float


SHORT_TERM_SCENARIOS = frozenset({1, 3})


def centroids_for(distance_m: float | None = None,
                  dists: EpisodeDistributions | None = None) -> tuple[Centroid, ...]:
    """Centroids of the calibrated bucket nearest ``distance_m`` (7 m when unknown)."""
    dists = dists or default_distributions()
    bucket = 7.0 if distance_m is None else nearest_bucket(distance_m)
    return tuple(Centroid(s, dists.entries[(s, bucket)].dq_drop, dists.entries[(s, bucket)].dq_rise)
                 for s in (1, 2, 3))


def _check_centroids(centroids: Sequence[Centroid]) -> None:
    if sorted(c.scenario_id for c in centroids) != [1, 2, 3]:
        raise ValueError("need exactly three centroids with ids 1, 2, 3")
    for c in centroids:
        if not (0.0 <= c.x_c <= 10.0 and 0.0 <= c.y_c <= 10.0):
            raise ValueError(f"centroid {c} outside the 0..10 quality scale")


@dataclass(frozen=True)
class DetectorConfig:
    t_drop_threshold_ms: int = 500
    t_recovery_threshold_ms: int = 3000
    drop_trigger_units: float = 2.0
    centroids: tuple[Centroid, ...] = field(default_factory=centroids_for)
    sample_period_ms: int = 1
    reference_window_ms: int = 500
    sliding_drop_window: bool = True

    def __post_init__(self):
        if self.t_drop_threshold_ms <= 0 or self.t_recovery_threshold_ms <= 0:
            raise ValueError("window thresholds must be positive")
        if self.drop_trigger_units <= 0:
            raise ValueError("drop_trigger_units must be positive")
        if self.sample_period_ms != 1:
            raise ValueError("only a 1 ms sample period is supported")
        if self.reference_window_ms <= 0:
            raise ValueError("reference_window_ms must be positive")
        object.__setattr__(self, "centroids", tuple(Centroid(*c) for c in self.centroids))
        _check_centroids(self.centroids)

    @property
    def characterization_ms(self) -> int:
        return self.t_drop_threshold_ms + self.t_recovery_threshold_ms


def _point(p) -> tuple[float, float]:
    if type(p) is Centroid:
        return p[1], p[2]
    return p[0], p[1]


def euclidean_distance(features, centroid) -> float:
    """Distance between a measured (x, y) and a centroid in the quality-change plane."""
    a = features[1:] if type(features) is Centroid else features
    b = centroid[1:] if type(centroid) is Centroid else centroid
    return math.hypot(a[0] - b[0], a[1] - b[1])


def euclidean_distances(points, centroids: Sequence[Centroid]) -> np.ndarray:
    """Batch form: an (n, 2) array of features against k centroids gives (n, k) distances."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    cxy = np.array([_point(c) for c in centroids], dtype=float)
    return np.hypot(pts[:, None, 0] - cxy[None, :, 0], pts[:, None, 1] - cxy[None, :, 1])


@dataclass(frozen=True)
class ClassificationResult:
    distances: tuple[float, float, float]
    chosen: int
    verdict: Verdict
    features: BlockageFeatures | None = None


def classify(features, centroids: Sequence[Centroid]) -> ClassificationResult:
    """Nearest centroid; exact ties go to the lowest scenario id."""
    _check_centroids(centroids)
    ordered = sorted(centroids, key=lambda c: c.scenario_id)
    distances = tuple(euclidean_distance(features, c) for c in ordered)
    best = min(range(3), key=lambda i: (distances[i], ordered[i].scenario_id))
    chosen = ordered[best].scenario_id
    verdict = Verdict.SHORT_TERM if chosen in SHORT_TERM_SCENARIOS else Verdict.LONG_TERM
    x, y = _point(features)
    return ClassificationResult(distances, chosen, verdict, BlockageFeatures(x, y))


@dataclass(frozen=True)
class DetectorEvent:
    kind: EventKind
    at_ms: int
    result: ClassificationResult | None = None


class DetectorError(ValueError):
    pass


_WATCH, _DROP, _RECOVERY = "watch", "drop", "recovery"


class BlockageDetector:
    """One instance per link stream; not safe for concurrent ``step`` calls."""

    def __init__(self, cfg: DetectorConfig | None = None):
        self.cfg = cfg or DetectorConfig()
        self._span = max(self.cfg.reference_window_ms, self.cfg.t_drop_threshold_ms)
        self._last_t: int | None = None
        self.reset()

    def reset(self) -> "BlockageDetector":
        """Back to watching; the reference is re-seeded from the next sample."""
        self._phase = _WATCH
        self._ref: deque[tuple[int, float]] = deque()
        self._recent: deque[float] = deque(maxlen=self._span)
        self._contiguous = False
        self._heartbeat_from: int | None = None
        self._anchor = 0
        self._level = 0.0
        self._x = 0.0
        self._q_min = 0.0
        self._y = 0.0
        self._indicated = False
        return self

    @property
    def phase(self) -> str:
        return self._phase

    def state_size(self) -> int:
        return len(self._ref) + len(self._recent)

    def snapshot(self) -> tuple:
        return (self._phase, tuple(self._ref), tuple(self._recent), self._contiguous,
                self._heartbeat_from, self._anchor, self._level, self._x, self._q_min,
                self._y, self._indicated)

    # -- streaming ----------------------------------------------------------

    def step(self, t_ms: int, q: float) -> DetectorEvent | None:
        if not 0.0 <= q <= 10.0:
            raise DetectorError(f"signal quality {q!r} outside 0..10 at t={t_ms}")
        if self._last_t is not None:
            if t_ms <= self._last_t:
                raise DetectorError(f"timestamps must increase: {t_ms} after {self._last_t}")
            if self._contiguous and t_ms != self._last_t + 1:
                raise DetectorError(f"gap in 1 ms sampling: {self._last_t} -> {t_ms}")
        self._last_t = t_ms
        self._contiguous = True

        if self._phase == _DROP and t_ms >= self._anchor + self.cfg.t_drop_threshold_ms:
            self._phase = _RECOVERY
        if self._phase == _RECOVERY:
            end = self._anchor + self.cfg.characterization_ms
            if t_ms >= end:
                result = classify(BlockageFeatures(self._x, self._y), self.cfg.centroids)
                self.reset()
                self._contiguous = True
                self._watch(t_ms, q)  # seeds the fresh reference
                return DetectorEvent(EventKind.CLASSIFIED, end, result)
            self._track_min(q)
            return None
        if self._phase == _DROP:
            if not self._indicated:
                self._push_ref(t_ms, q)
            return self._judge(t_ms, q)
        return self._watch(t_ms, q)

    def feed(self, t_ms: Sequence[int], q: Sequence[float]) -> list[DetectorEvent]:
        events = []
        for t, v in zip(t_ms, q):
            ev = self.step(int(t), float(v))
            if ev is not None:
                events.append(ev)
        return events

    # -- internals ----------------------------------------------------------

    def _push_ref(self, t_ms: int, q: float) -> None:
        ref = self._ref
        while ref and ref[-1][1] <= q:
            ref.pop()
        ref.append((t_ms, q))
        horizon = t_ms - self.cfg.reference_window_ms
        while ref[0][0] <= horizon:
            ref.popleft()
        self._recent.append(q)

    def _track_min(self, q: float) -> None:
        if q < self._q_min:
            self._q_min = q
            self._y = 0.0
        elif q - self._q_min > self._y:
            self._y = q - self._q_min

    def _judge(self, t_ms: int, q: float) -> DetectorEvent | None:
        self._track_min(q)
        drop = self._level - q
        if drop > self._x:
            self._x = drop
        if self._indicated:
            return None
        if self._x > self.cfg.drop_trigger_units:
            self._indicated = True
            return DetectorEvent(EventKind.INDICATION, t_ms)
        if t_ms >= self._anchor + self.cfg.t_drop_threshold_ms - 1:
            self._phase = _WATCH
            return DetectorEvent(EventKind.NO_BLOCKAGE, t_ms)
        return None

    def _watch(self, t_ms: int, q: float) -> DetectorEvent | None:
        self._push_ref(t_ms, q)
        t_ref, level = self._ref[0]
        if not self.cfg.sliding_drop_window:
            self._phase = _DROP
            self._anchor = t_ms
            self._level = level
            self._indicated = False
            self._x = 0.0
            self._q_min = q
            self._y = 0.0
            return self._judge(t_ms, q)

        if level - q > self.cfg.drop_trigger_units:
            anchor = max(t_ref + 1, t_ms - self.cfg.t_drop_threshold_ms + 1)
            n = t_ms - anchor + 1
            window = list(self._recent)[-n:]
            self._phase = _DROP
            self._anchor = anchor
            self._level = level
            self._indicated = True
            self._q_min = window[0]
            self._y = 0.0
            for v in window[1:]:
                self._track_min(v)
            self._x = level - self._q_min
            return DetectorEvent(EventKind.INDICATION, t_ms)
        if self._heartbeat_from is None:
            self._heartbeat_from = t_ms
        elif t_ms - self._heartbeat_from >= self.cfg.t_drop_threshold_ms:
            self._heartbeat_from = t_ms
            return DetectorEvent(EventKind.NO_BLOCKAGE, t_ms)
        return None
