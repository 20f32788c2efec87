import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from oracles import exact_distance, nearest, scan_events
from picocell60.detector import (
    BlockageDetector,
    BlockageFeatures,
    Centroid,
    DetectorConfig,
    DetectorError,
    EventKind,
    Verdict,
    centroids_for,
    classify,
    euclidean_distance,
    euclidean_distances,
)
from picocell60.link_model import LinkConfig, render_trace, sample_episode

C7 = centroids_for(7.0)
C3 = centroids_for(3.0)
coord = st.floats(0, 10, allow_nan=False)


def kinds(events):
    return [e.kind for e in events]


def feed_array(det, q, start=0):
    return det.feed(range(start, start + len(q)), q)


# -- distance and classification --------------------------------------------

@pytest.mark.parametrize("feat, cent", [
    ((7.72, 7.64), (7.72, 7.64)),
    ((8.0, 2.0), (7.30, 1.56)),
    ((4.0, 1.0), (4.06, 1.20)),
    ((0.0, 0.0), (7.72, 7.64)),
])
def test_distance_matches_exact_decimal(feat, cent):
    got = euclidean_distance(BlockageFeatures(*feat), Centroid(0, *cent))
    assert got == pytest.approx(exact_distance(*feat, *cent), rel=1e-12, abs=0)


def test_distance_zero_at_centroid():
    assert euclidean_distance((7.72, 7.64), C7[0]) == 0.0


def test_origin_picks_reflection_scenario():
    res = classify((0.0, 0.0), C7)
    expected, chosen = nearest(0.0, 0.0, C7)
    assert res.chosen == chosen == 3
    assert res.verdict is Verdict.SHORT_TERM
    assert res.distances == pytest.approx(expected, rel=1e-12)
    assert res.distances[2] < res.distances[1] < res.distances[0]


@pytest.mark.parametrize("table", [C3, C7])
def test_each_centroid_selects_itself(table):
    for c in table:
        res = classify((c.x_c, c.y_c), table)
        assert res.chosen == c.scenario_id
        assert res.distances[c.scenario_id - 1] == 0.0
        assert res.verdict is (Verdict.LONG_TERM if c.scenario_id == 2 else Verdict.SHORT_TERM)


def test_tie_goes_to_lowest_id():
    cents = (Centroid(1, 2.0, 0.0), Centroid(2, 0.0, 2.0), Centroid(3, 5.0, 5.0))
    assert classify((1.0, 1.0), cents).chosen == 1


def test_batch_distances_agree_with_scalar():
    pts = np.random.default_rng(3).uniform(0, 10, size=(50, 2))
    batch = euclidean_distances(pts, C7)
    for i, p in enumerate(pts):
        assert batch[i] == pytest.approx([euclidean_distance(p, c) for c in C7], rel=1e-12)


@pytest.mark.parametrize("bad", [
    (Centroid(1, 1, 1), Centroid(2, 2, 2)),
    (Centroid(1, 1, 1), Centroid(1, 2, 2), Centroid(3, 3, 3)),
    (Centroid(1, 1, 1), Centroid(2, 11, 2), Centroid(3, 3, 3)),
])
def test_bad_centroids_rejected(bad):
    with pytest.raises(ValueError):
        classify((1, 1), bad)


@given(coord, coord, coord, coord)
def test_distance_symmetric_and_nonnegative(x, y, a, b):
    d1 = euclidean_distance((x, y), (a, b))
    assert d1 >= 0
    assert d1 == euclidean_distance((a, b), (x, y))
    assert (d1 == 0) == (x == a and y == b)


@given(coord, coord, st.floats(-2, 2), st.floats(-2, 2))
def test_argmin_invariant_under_translation(x, y, dx, dy):
    moved = tuple(Centroid(c.scenario_id, c.x_c + dx, c.y_c + dy) for c in C7)
    assume(all(0 <= c.x_c <= 10 and 0 <= c.y_c <= 10 for c in moved))
    before = classify((x, y), C7)
    after = classify((x + dx, y + dy), moved)
    assert after.distances == pytest.approx(before.distances, abs=1e-9)
    gap = sorted(before.distances)[1] - min(before.distances)
    if gap > 1e-9:
        assert after.chosen == before.chosen


@given(coord, coord)
def test_chosen_has_minimal_distance(x, y):
    res = classify((x, y), C3)
    assert res.distances[res.chosen - 1] == min(res.distances)
    assert (res.verdict is Verdict.SHORT_TERM) == (res.chosen in (1, 3))


# -- config -----------------------------------------------------------------

@pytest.mark.parametrize("kw", [
    {"t_drop_threshold_ms": 0}, {"t_recovery_threshold_ms": -1},
    {"drop_trigger_units": 0}, {"sample_period_ms": 2}, {"reference_window_ms": 0},
])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        DetectorConfig(**kw)


def test_unknown_distance_defaults_to_seven_metre_table():
    assert centroids_for() == C7
    assert centroids_for(2.0) == C3
    assert centroids_for(5.0) == C3  # equidistant, lower bucket


# -- streaming --------------------------------------------------------------

def test_constant_stream_never_indicates():
    events = feed_array(BlockageDetector(), [9] * 10000)
    assert EventKind.INDICATION not in kinds(events)
    assert set(kinds(events)) <= {EventKind.NO_BLOCKAGE}


def test_step_to_one_is_long_term():
    t0 = 2000
    q = [9] * t0 + [1] * 5000
    events = feed_array(BlockageDetector(), q)
    ind = next(e for e in events if e.kind is EventKind.INDICATION)
    cls = next(e for e in events if e.kind is EventKind.CLASSIFIED)
    assert t0 <= ind.at_ms <= t0 + 500
    assert cls.result.features == (8.0, 0.0)
    assert cls.result.chosen == 2 and cls.result.verdict is Verdict.LONG_TERM
    assert cls.at_ms == t0 + 500 + 3000  # drop window opens at the step


def test_one_second_dip_is_transient():
    q = [9] * 2000 + [1] * 1000 + [9] * 4000
    cls = [e for e in feed_array(BlockageDetector(), q) if e.kind is EventKind.CLASSIFIED]
    assert len(cls) == 1
    assert cls[0].result.features == (8.0, 8.0)
    assert cls[0].result.chosen == 1 and cls[0].result.verdict is Verdict.SHORT_TERM


def test_two_dips_give_two_classifications():
    dip = [9] * 1500 + [1] * 800 + [9] * 3500
    cls = [e for e in feed_array(BlockageDetector(), dip * 2) if e.kind is EventKind.CLASSIFIED]
    assert len(cls) == 2
    assert all(c.result.chosen == 1 for c in cls)


def test_classified_always_follows_indication():
    rng = np.random.default_rng(5)
    q = np.clip(9 + np.cumsum(rng.choice([-2, 0, 2], 30000, p=[.002, .996, .002])), 0, 10)
    pending = False
    for e in feed_array(BlockageDetector(), q.tolist()):
        if e.kind is EventKind.INDICATION:
            assert not pending
            pending = True
        elif e.kind is EventKind.CLASSIFIED:
            assert pending
            pending = False


def test_reset_mid_recovery_suppresses_classification():
    det = BlockageDetector()
    events = feed_array(det, [9] * 1000 + [1] * 1000)
    assert EventKind.INDICATION in kinds(events)
    det.reset()
    later = feed_array(det, [1] * 6000, start=2000)
    assert EventKind.CLASSIFIED not in kinds(later)


def test_reset_is_idempotent():
    det = BlockageDetector()
    feed_array(det, [9] * 700 + [2] * 300)
    once = det.reset().snapshot()
    assert det.reset().snapshot() == once


def test_recovery_tracks_new_minimum():
    # falls to 5, bounces to 7, then falls to 1 and recovers to 4: y is measured from 1
    q = [9] * 1000 + [5] * 200 + [7] * 200 + [1] * 300 + [4] * 4000
    cls = next(e for e in feed_array(BlockageDetector(), q) if e.kind is EventKind.CLASSIFIED)
    assert cls.result.features.y == 3.0


@pytest.mark.parametrize("bad_q", [-0.1, 10.5, float("nan")])
def test_rejects_out_of_range_quality(bad_q):
    with pytest.raises(DetectorError):
        BlockageDetector().step(0, bad_q)


def test_rejects_non_increasing_time_and_gaps():
    det = BlockageDetector()
    det.step(10, 9)
    with pytest.raises(DetectorError):
        det.step(10, 9)
    with pytest.raises(DetectorError):
        det.step(12, 9)


def test_gap_allowed_right_after_reset():
    det = BlockageDetector()
    det.step(0, 9)
    det.reset()
    det.step(100, 9)


def test_tumbling_mode_detects_step():
    cfg = DetectorConfig(sliding_drop_window=False)
    events = feed_array(BlockageDetector(cfg), [9] * 2000 + [1] * 5000)
    cls = [e for e in events if e.kind is EventKind.CLASSIFIED]
    assert cls and cls[0].result.chosen == 2
    nob = [e.at_ms for e in events if e.kind is EventKind.NO_BLOCKAGE]
    assert nob[:3] == [499, 999, 1499]


def test_state_is_bounded():
    cfg = DetectorConfig(t_drop_threshold_ms=300, t_recovery_threshold_ms=1000)
    det = BlockageDetector(cfg)
    rng = np.random.default_rng(2)
    q = rng.integers(0, 11, 50000)
    worst = 0
    for t, v in enumerate(q.tolist()):
        det.step(t, v)
        worst = max(worst, det.state_size())
    assert worst <= 2 * (cfg.t_drop_threshold_ms + cfg.reference_window_ms)


# -- streaming vs offline window scan ---------------------------------------

def _as_tuples(events):
    out = []
    for e in events:
        if e.kind is EventKind.INDICATION:
            out.append(("ind", e.at_ms))
        elif e.kind is EventKind.NO_BLOCKAGE:
            out.append(("none", e.at_ms))
        else:
            f = e.result.features
            out.append(("cls", e.at_ms, f.x, f.y, e.result.chosen))
    return out


def random_trace(rng):
    n = int(rng.integers(400, 2000))
    kind = int(rng.integers(3))
    if kind == 0:
        s, d = int(rng.integers(1, 4)), float(rng.choice([3.0, 7.0]))
        ep = sample_episode(s, d, rng, onset_ms=int(rng.integers(0, 400)))
        return render_trace([ep], LinkConfig(d), rng, duration_ms=n).q
    if kind == 1:
        steps = rng.choice([-1, 0, 1], size=n, p=[0.01, 0.98, 0.01])
        return np.clip(9 + np.cumsum(steps), 0, 10)
    q = np.full(n, 9)
    for _ in range(int(rng.integers(1, 5))):
        a = int(rng.integers(0, n))
        q[a:a + int(rng.integers(1, 600))] = rng.integers(0, 10)
    return q


def check_against_oracle(rng):
    q = random_trace(rng)
    t_d, t_r = int(rng.integers(20, 500)), int(rng.integers(50, 1200))
    window = int(rng.integers(1, 500))
    trigger = float(rng.choice([1.0, 2.0, 3.5]))
    cfg = DetectorConfig(t_d, t_r, trigger, reference_window_ms=window)
    live = _as_tuples(BlockageDetector(cfg).feed(range(len(q)), q.tolist()))
    assert live == scan_events(q, t_d, t_r, trigger, window, cfg.centroids)


def test_streaming_matches_window_scan_on_1000_traces():
    rng = np.random.default_rng(20240)
    for _ in range(1000):
        check_against_oracle(rng)


@given(st.integers(0, 2**32 - 1))
def test_streaming_matches_window_scan_hypothesis(seed):
    check_against_oracle(np.random.default_rng(seed))
