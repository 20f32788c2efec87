import pytest
from hypothesis import given
from hypothesis import strategies as st

from picocell60.detector import (
    BlockageFeatures,
    ClassificationResult,
    DetectorConfig,
    DetectorEvent,
    EventKind,
    Verdict,
)
from picocell60.handoff import (
    ApSnapshot,
    HandoffConfig,
    HandoffController,
    HandoffError,
    Mode,
    NoCandidateError,
    Trigger,
    select_target_ap,
    total_switch_time,
)


def cfg_with(t_d, t_r, dis, auth, assoc, **kw):
    return HandoffConfig(dis, auth, assoc, detector=DetectorConfig(t_d, t_r), **kw)


def verdict_event(at, verdict):
    chosen = 2 if verdict is Verdict.LONG_TERM else 1
    res = ClassificationResult((1.0, 1.0, 1.0), chosen, verdict, BlockageFeatures(8.0, 0.0))
    return DetectorEvent(EventKind.CLASSIFIED, at, res)


def two_ap_controller(cfg=None, ramp=0):
    ctl = HandoffController(cfg or HandoffConfig(),
                            candidates=lambda t: [ApSnapshot("AP1", 9.0), ApSnapshot("AP2", 8.0)],
                            association_ramp=lambda: ramp)
    ctl.associate("AP1", 0)
    return ctl


# -- switch time ------------------------------------------------------------

def test_total_switch_time_direct_sum():
    assert total_switch_time(cfg_with(500, 3000, 1000, 500, 1249)) == 6249


def test_total_switch_time_with_three_second_recovery_window():
    assert total_switch_time(cfg_with(1000, 3000, 1500, 400, 849)) == 6749


def test_total_switch_time_with_two_second_recovery_window():
    assert total_switch_time(cfg_with(1000, 2000, 1500, 400, 849)) == 5749


def test_zero_phases_leave_only_windows():
    # windows must be positive, so zero out only the switch phases
    assert total_switch_time(cfg_with(1, 1, 0, 0, 0)) == 2


def test_default_switch_duration():
    assert HandoffConfig().switch_ms == 2749


@pytest.mark.parametrize("kw", [{"discovery_ms": -1}, {"corner_quality_floor": 11}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        HandoffConfig(**kw)


# -- target selection -------------------------------------------------------

def test_select_prefers_unobstructed_ap():
    assert select_target_ap([ApSnapshot("A", 0.0), ApSnapshot("B", 7.5)]) == "B"


def test_select_single_and_tie():
    assert select_target_ap([ApSnapshot("A", 3.0)]) == "A"
    assert select_target_ap([ApSnapshot("B", 5.0), ApSnapshot("A", 5.0)]) == "A"


def test_select_excludes_current_and_errors_when_empty():
    assert select_target_ap([ApSnapshot("A", 9), ApSnapshot("B", 1)], current_ap="A") == "B"
    with pytest.raises(NoCandidateError):
        select_target_ap([])
    with pytest.raises(NoCandidateError):
        select_target_ap([ApSnapshot("A", 9)], current_ap="A")


# -- samples ----------------------------------------------------------------

def test_constant_quality_changes_nothing():
    ctl = two_ap_controller()
    for t in range(1, 10000):
        assert ctl.on_sample(t, 9) is None
    assert ctl.mode is Mode.ASSOCIATED and ctl.state.current_ap == "AP1"


def test_corner_rule_fires_on_first_sub_floor_sample():
    ctl = two_ap_controller()
    for t in range(1, 1000):
        ctl.on_sample(t, 9)
    assert ctl.on_sample(1000, 2) is None  # floor itself is not below the floor
    rec = ctl.on_sample(1001, 1)
    assert rec.trigger is Trigger.CORNER_EFFECT
    assert rec.t_start_ms == 1001 and rec.t_s_ms == rec.t_H_ms == 2749
    assert (rec.from_ap, rec.to_ap) == ("AP1", "AP2")
    assert ctl.mode is Mode.SWITCHING and ctl.state.current_ap is None


def test_corner_rule_can_be_disabled():
    ctl = two_ap_controller(HandoffConfig(corner_rule=False))
    for t in range(1, 100):
        assert ctl.on_sample(t, 0) is None
    assert ctl.records == []


def test_samples_while_disconnected_are_counted():
    ctl = HandoffController()
    for t in range(5):
        ctl.on_sample(t, 7)
    assert ctl.state.ignored_samples == 5 and ctl.mode is Mode.DISCONNECTED


def test_switch_completes_then_ramps():
    ctl = two_ap_controller(ramp=250)
    ctl.on_sample(1, 9)
    rec = ctl.on_sample(2, 0)
    for t in range(3, rec.t_complete_ms):
        ctl.on_sample(t, 0)
        assert ctl.mode is Mode.SWITCHING
    ctl.on_sample(rec.t_complete_ms, 0)
    assert ctl.mode is Mode.ASSOCIATING
    for t in range(rec.t_complete_ms + 1, rec.t_complete_ms + 250):
        ctl.on_sample(t, 5)
    assert ctl.mode is Mode.ASSOCIATING
    ctl.on_sample(rec.t_complete_ms + 250, 9)
    assert ctl.mode is Mode.ASSOCIATED and ctl.state.current_ap == "AP2"


def test_no_candidate_aborts_to_disconnected():
    ctl = HandoffController()
    ctl.associate("AP1", 0)
    assert ctl.on_sample(1, 0) is None
    assert ctl.mode is Mode.DISCONNECTED and ctl.state.aborted_handoffs == 1


def test_blockage_step_triggers_long_term_switch():
    cfg = HandoffConfig(corner_rule=False)
    ctl = two_ap_controller(cfg)
    recs = [ctl.on_sample(t, 9 if t < 2000 else 1) for t in range(1, 8000)]
    recs = [r for r in recs if r is not None]
    assert len(recs) == 1
    rec = recs[0]
    assert rec.trigger is Trigger.LONG_TERM_BLOCKAGE
    assert rec.t_s_ms - rec.t_H_ms == cfg.detector.t_drop_threshold_ms + cfg.detector.t_recovery_threshold_ms
    assert rec.t_start_ms == 2000 + 3500


# -- detector events --------------------------------------------------------

def test_long_term_event_starts_switch():
    ctl = two_ap_controller()
    ctl.on_detector_event(DetectorEvent(EventKind.INDICATION, 10))
    assert ctl.mode is Mode.CHARACTERIZING and ctl.state.current_ap == "AP1"
    rec = ctl.on_detector_event(verdict_event(3510, Verdict.LONG_TERM))
    assert rec.t_H_ms == 2749 and rec.t_complete_ms == 3510 + 2749
    assert rec.t_s_ms == 2749 + 3500


def test_short_term_event_keeps_ap():
    ctl = two_ap_controller()
    ctl.on_detector_event(DetectorEvent(EventKind.INDICATION, 10))
    assert ctl.on_detector_event(verdict_event(3510, Verdict.SHORT_TERM)) is None
    assert ctl.mode is Mode.ASSOCIATED and ctl.state.current_ap == "AP1"


def test_long_term_only_logged_when_handoff_disabled():
    ctl = two_ap_controller(HandoffConfig(blockage_handoff=False))
    ctl.on_detector_event(DetectorEvent(EventKind.INDICATION, 10))
    assert ctl.on_detector_event(verdict_event(3510, Verdict.LONG_TERM)) is None
    assert ctl.mode is Mode.ASSOCIATED


def test_no_blockage_is_pure_noop():
    ctl = two_ap_controller()
    before = vars(ctl.state).copy()
    assert ctl.on_detector_event(DetectorEvent(EventKind.NO_BLOCKAGE, 500)) is None
    assert vars(ctl.state) == before


@pytest.mark.parametrize("events", [
    [DetectorEvent(EventKind.NO_BLOCKAGE, 500), DetectorEvent(EventKind.NO_BLOCKAGE, 100)],
    [verdict_event(10, Verdict.SHORT_TERM)],
    [DetectorEvent(EventKind.INDICATION, 10), DetectorEvent(EventKind.INDICATION, 20)],
    [DetectorEvent(EventKind.INDICATION, 10), DetectorEvent(EventKind.CLASSIFIED, 20)],
])
def test_out_of_order_events_rejected(events):
    ctl = two_ap_controller()
    with pytest.raises(HandoffError):
        for e in events:
            ctl.on_detector_event(e)


def test_manual_handoff_has_no_characterization_delay():
    ctl = two_ap_controller()
    rec = ctl.request_handoff(100)
    assert rec.trigger is Trigger.MANUAL and rec.t_s_ms == rec.t_H_ms
    with pytest.raises(HandoffError):
        ctl.request_handoff(200)


def test_associate_only_from_disconnected():
    ctl = two_ap_controller()
    with pytest.raises(HandoffError):
        ctl.associate("AP2", 5)


# -- fuzzing ----------------------------------------------------------------

quality = st.one_of(st.integers(0, 10), st.floats(-1, 11), st.just(float("nan")))
event = st.builds(
    DetectorEvent,
    st.sampled_from(list(EventKind)),
    st.integers(0, 20000),
    st.one_of(st.none(), st.sampled_from([Verdict.LONG_TERM, Verdict.SHORT_TERM]).map(
        lambda v: verdict_event(0, v).result)),
)
action = st.one_of(
    st.tuples(st.just("sample"), st.integers(-5, 400), quality),
    st.tuples(st.just("event"), event),
    st.tuples(st.just("associate"), st.sampled_from(["AP1", "AP2", "AP3"]), st.integers(0, 500)),
    st.tuples(st.just("manual")),
)


@given(st.lists(action, max_size=120), st.booleans(), st.booleans(), st.integers(0, 300))
def test_fuzzed_inputs_only_succeed_or_raise_handoff_error(actions, corner, have_aps, ramp):
    cands = (lambda t: [ApSnapshot("AP1", 9.0), ApSnapshot("AP2", 4.0)]) if have_aps else None
    cfg = HandoffConfig(corner_rule=corner,
                        detector=DetectorConfig(t_drop_threshold_ms=20, t_recovery_threshold_ms=40))
    ctl = HandoffController(cfg, cands, lambda: ramp)
    t = 0
    switching_starts = 0
    for act in actions:
        before = ctl.mode
        try:
            if act[0] == "sample":
                t += act[1]
                rec = ctl.on_sample(t, act[2])
            elif act[0] == "event":
                rec = ctl.on_detector_event(act[1])
            elif act[0] == "associate":
                rec = ctl.associate(act[1], t, act[2])
            else:
                rec = ctl.request_handoff(t)
        except HandoffError:
            assert ctl.mode is before or act[0] == "sample"
            rec = None
        ctl.state.check()
        if rec is not None:
            switching_starts += 1
            assert ctl.mode is Mode.SWITCHING
            assert rec.from_ap is not None and rec.from_ap != rec.to_ap
            long_term = rec.trigger is Trigger.LONG_TERM_BLOCKAGE
            expect = rec.t_H_ms + (cfg.detector.characterization_ms if long_term else 0)
            assert rec.t_s_ms == expect
    assert switching_starts == len(ctl.records)
