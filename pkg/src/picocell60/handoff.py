"""Per-STA handoff state machine driven by quality samples and detector verdicts."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Hashable, NamedTuple, Sequence

from picocell60.detector import (
    BlockageDetector,
    DetectorConfig,
    DetectorError,
    DetectorEvent,
    EventKind,
    Verdict,
)


class Trigger(str, Enum):
    LONG_TERM_BLOCKAGE = "LongTermBlockage"
    CORNER_EFFECT = "CornerEffect"
    MANUAL = "Manual"


class Mode(str, Enum):
    DISCONNECTED = "Disconnected"
    ASSOCIATING = "Associating"
    ASSOCIATED = "Associated"
    CHARACTERIZING = "Characterizing"
    SWITCHING = "Switching"


CONNECTED = (Mode.ASSOCIATED, Mode.CHARACTERIZING)


class HandoffError(RuntimeError):
    """An input that is not valid in the controller's current mode."""


class NoCandidateError(HandoffError):
    pass


@dataclass(frozen=True)
class HandoffConfig:
    # only the 2749 ms sum was measured; the split is a placeholder
    discovery_ms: int = 1500
    auth_ms: int = 400
    assoc_ms: int = 849
    corner_quality_floor: float = 2.0
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    corner_rule: bool = True
    blockage_handoff: bool = True

    def __post_init__(self):
        if min(self.discovery_ms, self.auth_ms, self.assoc_ms) < 0:
            raise ValueError("handoff phase durations must be >= 0")
        if not 0.0 <= self.corner_quality_floor <= 10.0:
            raise ValueError("corner_quality_floor must lie in 0..10")

    @property
    def switch_ms(self):
        return self.discovery_ms + self.auth_ms + self.assoc_ms


def total_switch_time(cfg: HandoffConfig):
    """Blockage-triggered switch delay: both observation windows plus discovery, auth, association."""
    det = cfg.detector
    return (det.t_recovery_threshold_ms + det.t_drop_threshold_ms
            + cfg.discovery_ms + cfg.auth_ms + cfg.assoc_ms)


@dataclass(frozen=True)
class HandoffRecord:
    trigger: Trigger
    from_ap: Hashable
    to_ap: Hashable
    t_start_ms: int
    t_complete_ms: int
    t_H_ms: int
    t_s_ms: int


class ApSnapshot(NamedTuple):
    ap_id: Hashable
    predicted_q: float


def select_target_ap(candidates: Sequence[ApSnapshot], current_ap: Hashable | None = None):
    """Best predicted quality among APs other than the current one; ties to the lowest id."""
    pool = [c for c in candidates if c.ap_id != current_ap]
    if not pool:
        raise NoCandidateError("no alternate AP to switch to")
    return min(pool, key=lambda c: (-c.predicted_q, c.ap_id)).ap_id


@dataclass
class StaState:
    mode: Mode = Mode.DISCONNECTED
    current_ap: Hashable | None = None
    last_q: float = 0.0
    pending_ap: Hashable | None = None
    ready_at_ms: int | None = None
    ignored_samples: int = 0
    aborted_handoffs: int = 0

    def check(self) -> None:
        if (self.current_ap is not None) != (self.mode in CONNECTED):
            raise AssertionError(f"current_ap={self.current_ap!r} inconsistent with {self.mode}")


class HandoffController:
    """Handoff logic for one STA.

    ``candidates(t_ms)`` returns the APs visible at switch time; without it
    every handoff aborts to Disconnected.  ``association_ramp()`` gives the
    time the new link takes to settle after a switch (0 when omitted).
    """

    def __init__(self, cfg: HandoffConfig | None = None,
                 candidates: Callable[[int], Sequence[ApSnapshot]] | None = None,
                 association_ramp: Callable[[], int] | None = None):
        self.cfg = cfg or HandoffConfig()
        self.detector = BlockageDetector(self.cfg.detector)
        self.state = StaState()
        self.events: list[DetectorEvent] = []
        self.records: list[HandoffRecord] = []
        self._candidates = candidates
        self._ramp = association_ramp
        self._last_event_ms: int | None = None
        self._last_sample_ms: int | None = None

    @property
    def mode(self) -> Mode:
        return self.state.mode

    def associate(self, ap_id: Hashable, t_ms: int, duration_ms: int = 0) -> None:
        if self.state.mode is not Mode.DISCONNECTED:
            raise HandoffError(f"cannot start association while {self.state.mode.value}")
        self._begin_association(ap_id, t_ms, duration_ms)

    def on_sample(self, t_ms: int, q: float) -> HandoffRecord | None:
        st = self.state
        if not 0.0 <= q <= 10.0:
            raise HandoffError(f"signal quality {q!r} outside 0..10")
        if self._last_sample_ms is not None and t_ms <= self._last_sample_ms:
            raise HandoffError(f"sample at {t_ms} arrived after {self._last_sample_ms}")
        self._last_sample_ms = t_ms
        st.last_q = q
        if st.mode is Mode.DISCONNECTED:
            st.ignored_samples += 1
            return None
        if st.mode is Mode.SWITCHING:
            if t_ms < st.ready_at_ms:
                return None
            self._begin_association(st.pending_ap, t_ms, self._ramp() if self._ramp else 0)
        if st.mode is Mode.ASSOCIATING:
            if t_ms < st.ready_at_ms:
                return None
            self._finish_association()

        if self.cfg.corner_rule and q < self.cfg.corner_quality_floor:
            return self._start_switch(t_ms, Trigger.CORNER_EFFECT)
        try:
            event = self.detector.step(t_ms, q)
        except DetectorError as exc:
            raise HandoffError(str(exc)) from exc
        if event is None:
            return None
        return self.on_detector_event(event)

    def on_detector_event(self, event: DetectorEvent) -> HandoffRecord | None:
        st = self.state
        if self._last_event_ms is not None and event.at_ms < self._last_event_ms:
            raise HandoffError(f"event at {event.at_ms} arrived after {self._last_event_ms}")
        if st.mode not in CONNECTED:
            raise HandoffError(f"{event.kind.value} event while {st.mode.value}")
        kind = event.kind
        if kind is EventKind.INDICATION and st.mode is Mode.CHARACTERIZING:
            raise HandoffError("second blockage indication before classification")
        if kind is EventKind.CLASSIFIED and st.mode is not Mode.CHARACTERIZING:
            raise HandoffError("classification without a preceding blockage indication")
        if kind is EventKind.CLASSIFIED and event.result is None:
            raise HandoffError("classification event carries no result")
        self._last_event_ms = event.at_ms
        self.events.append(event)

        if kind is EventKind.NO_BLOCKAGE:
            return None
        if kind is EventKind.INDICATION:
            st.mode = Mode.CHARACTERIZING
            return None
        st.mode = Mode.ASSOCIATED
        if event.result.verdict is Verdict.LONG_TERM and self.cfg.blockage_handoff:
            return self._start_switch(event.at_ms, Trigger.LONG_TERM_BLOCKAGE)
        return None

    def request_handoff(self, t_ms: int) -> HandoffRecord | None:
        if self.state.mode not in CONNECTED:
            raise HandoffError(f"manual handoff while {self.state.mode.value}")
        return self._start_switch(t_ms, Trigger.MANUAL)

    # -- internals ----------------------------------------------------------

    def _begin_association(self, ap_id, t_ms: int, duration_ms: int) -> None:
        st = self.state
        st.current_ap = None
        st.pending_ap = ap_id
        st.mode = Mode.ASSOCIATING
        st.ready_at_ms = t_ms + max(0, int(duration_ms))
        if duration_ms <= 0:
            self._finish_association()

    def _finish_association(self) -> None:
        st = self.state
        st.mode = Mode.ASSOCIATED
        st.current_ap, st.pending_ap, st.ready_at_ms = st.pending_ap, None, None
        self.detector.reset()

    def _start_switch(self, t_ms: int, trigger: Trigger) -> HandoffRecord | None:
        st = self.state
        from_ap = st.current_ap
        self.detector.reset()
        try:
            target = select_target_ap(self._candidates(t_ms) if self._candidates else [], from_ap)
        except NoCandidateError:
            st.mode, st.current_ap = Mode.DISCONNECTED, None
            st.aborted_handoffs += 1
            return None
        t_h = self.cfg.switch_ms
        t_s = t_h + (self.cfg.detector.characterization_ms
                     if trigger is Trigger.LONG_TERM_BLOCKAGE else 0)
        record = HandoffRecord(trigger, from_ap, target, t_ms, t_ms + t_h, t_h, t_s)
        st.mode, st.current_ap, st.pending_ap, st.ready_at_ms = (
            Mode.SWITCHING, None, target, t_ms + t_h)
        self.records.append(record)
        return record
