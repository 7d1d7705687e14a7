"""Gaze preprocessing, saccade detection, EMR and the median-split classifier."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from physiocue.errors import InvalidInputError
from physiocue.oculomotor import (
    GazeTrace,
    IntervalAnnotation,
    SaccadeEvent,
    angular_velocity,
    detect_from_gaze,
    detect_saccades,
    emr_over_interval,
    median_threshold_classify,
    preprocess_gaze,
)
from physiocue.series import UniformSeries
from physiocue.synth import GazeSynthSpec, jitter_for_velocity_noise, synth_gaze_trace

DEG = math.pi / 180


def match_events(pred, true):
    """Greedy one-to-one matching of events whose frame spans overlap."""
    used = set()
    hits = 0
    for p in pred:
        for j, t in enumerate(true):
            if j not in used and p.start_frame <= t.end_frame and t.start_frame <= p.end_frame:
                used.add(j)
                hits += 1
                break
    return hits


# -- preprocessing ---------------------------------------------------------------------


def test_block_mean_example():
    g = GazeTrace.from_arrays([0.1, 0.1, 0.1, 0.2, 0.2, 0.2], np.zeros(6), 90.0)
    out = preprocess_gaze(g)
    np.testing.assert_allclose(out.gaze_x_rad.samples, [0.1, 0.2])
    assert out.rate_hz == 30.0
    assert out.gaze_x_rad.start_time_s == pytest.approx(1 / 90)


def test_partial_block_dropped():
    g = GazeTrace.from_arrays(np.zeros(7), np.zeros(7), 90.0)
    assert len(preprocess_gaze(g)) == 2


def test_eyes_averaged():
    left = np.array([0.0, 0.0, 0.0, 0.2, 0.2, 0.2])
    right = np.array([0.2, 0.2, 0.2, 0.0, 0.0, 0.0])
    g = GazeTrace.from_arrays(left, np.zeros(6), 90.0, x_right=right, y_right=np.zeros(6))
    np.testing.assert_allclose(preprocess_gaze(g).gaze_x_rad.samples, [0.1, 0.1])


@given(st.floats(-1.5, 1.5), st.integers(3, 50))
def test_constant_trace_stays_constant(c, n):
    g = GazeTrace.from_arrays(np.full(n, c), np.full(n, -c / 2), 60.0)
    out = preprocess_gaze(g)
    np.testing.assert_allclose(out.gaze_x_rad.samples, c)
    if len(out) > 1:
        np.testing.assert_array_equal(angular_velocity(out).samples, 0.0)


def test_gaze_validation():
    with pytest.raises(InvalidInputError):
        GazeTrace.from_arrays([2.0, 0.0], [0.0, 0.0], 90.0)
    with pytest.raises(InvalidInputError):
        GazeTrace.from_arrays([0.0, 0.0], [0.0], 90.0)
    with pytest.raises(InvalidInputError):
        GazeTrace.from_arrays([0.0] * 3, [0.0] * 3, 90.0, x_right=[0.0] * 3)
    with pytest.raises(InvalidInputError):
        preprocess_gaze(GazeTrace.from_arrays([0.0] * 2, [0.0] * 2, 90.0))


# -- velocity -------------------------------------------------------------------------------


def test_velocity_arithmetic():
    g = GazeTrace.from_arrays([0.0, 3 * DEG], [0.0, 0.0], 30.0)
    assert angular_velocity(g).samples[0] == pytest.approx(90.0)


def test_velocity_isotropic():
    h = GazeTrace.from_arrays([0.0, 0.05], [0.0, 0.0], 30.0)
    v = GazeTrace.from_arrays([0.0, 0.0], [0.0, 0.05], 30.0)
    assert angular_velocity(h).samples[0] == angular_velocity(v).samples[0]


@given(st.floats(-40, 40), st.floats(-40, 40))
@settings(max_examples=30)
def test_ramp_velocity_is_analytic(vx, vy):
    # [DERIVED] constant angular velocity survives block averaging unchanged
    t = np.arange(90) / 90.0
    g = GazeTrace.from_arrays(vx * DEG * t, vy * DEG * t, 90.0)
    v = angular_velocity(preprocess_gaze(g)).samples
    np.testing.assert_allclose(v, math.hypot(vx, vy), atol=1e-6)


# -- detection --------------------------------------------------------------------------


def v_series(vals, rate=30.0):
    return UniformSeries(np.asarray(vals, float), rate)


def test_single_two_frame_run():
    ev = detect_saccades(v_series([0, 10, 70, 80, 10, 0]))
    assert ev == [SaccadeEvent(2, 3, 80.0)]
    assert ev[0].duration_frames == 2


def test_sub_threshold_is_empty():
    assert detect_saccades(v_series([0, 49.9, 10])) == []


def test_long_runs_discarded():
    ev = detect_saccades(v_series([0] + [60] * 11 + [0] + [60] * 10), max_frames=10)
    assert [(e.start_frame, e.end_frame) for e in ev] == [(13, 22)]


def test_threshold_must_be_positive():
    with pytest.raises(InvalidInputError):
        detect_saccades(v_series([1.0]), 0.0)


def test_event_count_not_monotone_in_general():
    # a dip between two peaks splits one run into two at a higher threshold
    v = v_series([0, 60, 40, 60, 0])
    assert len(detect_saccades(v, 25)) == 1
    assert len(detect_saccades(v, 50)) == 2


@given(arrays(np.float64, st.integers(1, 60), elements=st.floats(0, 200)), st.floats(1, 100), st.floats(1, 100))
def test_events_respect_threshold_and_nest(v, a, b):
    lo, hi = sorted((a, b))
    s = v_series(v)
    ev_hi = detect_saccades(s, hi, max_frames=len(v))
    ev_lo = detect_saccades(s, lo, max_frames=len(v))
    for e in ev_hi:
        assert 1 <= e.duration_frames
        assert e.peak_velocity_dps >= hi
        assert np.all(v[e.start_frame : e.end_frame + 1] >= hi)
        # every high-threshold event sits inside one low-threshold event
        assert any(f.start_frame <= e.start_frame and e.end_frame <= f.end_frame for f in ev_lo)


def test_synthetic_saccades_detected():
    # [DERIVED] 20 injected saccades >= 100 dps in 5 dps fixation noise
    g, truth = synth_gaze_trace(GazeSynthSpec(seed=11, jitter_sd_deg=jitter_for_velocity_noise(5.0),
                                              min_peak_dps=100.0))
    ev, v = detect_from_gaze(g)
    assert len(truth) == 20
    assert abs(len(ev) - 20) <= 1
    assert match_events(ev, truth) >= 19


# -- EMR ------------------------------------------------------------------------------------


def ann(start, end, label="truthful"):
    return IntervalAnnotation(1, "response", start, end, label, "S1")


def test_emr_examples():
    ev = [SaccadeEvent(f, f, 60.0) for f in (30, 60, 90, 120, 150)]
    assert emr_over_interval(ev, ann(0.0, 10.0), 30.0) == pytest.approx(0.5)
    assert emr_over_interval([], ann(0.0, 10.0), 30.0) == 0.0
    # starts before the interval, ends inside: not counted
    assert emr_over_interval([SaccadeEvent(29, 32, 70.0)], ann(1.0, 2.0), 30.0) == 0.0


@given(st.lists(st.integers(0, 3000), max_size=30), st.integers(0, 1600), st.integers(1, 1280), st.integers(-640, 640))
def test_emr_translation_invariant(frames, start, dur, k):
    # a power-of-two rate keeps every timestamp an exact binary fraction
    rate = 32.0
    ev = [SaccadeEvent(f, f, 60.0) for f in frames]
    a = emr_over_interval(ev, ann(start / rate, (start + dur) / rate), rate, 0.0)
    b = emr_over_interval(ev, ann((start + k) / rate, (start + dur + k) / rate), rate, k / rate)
    assert a == b


def test_annotation_validation():
    with pytest.raises(InvalidInputError):
        ann(2.0, 1.0)
    with pytest.raises(InvalidInputError):
        IntervalAnnotation(1, "response", 0.0, 1.0, None, "S")
    with pytest.raises(InvalidInputError):
        IntervalAnnotation(1, "pause", 0.0, 1.0, None, "S")
    q = IntervalAnnotation(1, "question", 0.0, 1.0, None, "S")
    assert q.contains(0.0) and not q.contains(1.0)


# -- median split ------------------------------------------------------------------------------


def test_median_split_example():
    recs = [("S", "truthful", 1), ("S", "truthful", 2), ("S", "deceptive", 3), ("S", "deceptive", 4)]
    res = median_threshold_classify(recs)
    assert res.thresholds == {"S": 2.5}
    assert res.accuracy == 1.0
    assert res.predictions == [False, False, True, True]


def test_median_split_ties_predict_truthful():
    recs = [("S", "truthful", 1.0), ("S", "deceptive", 1.0), ("S", "truthful", 1.0)]
    res = median_threshold_classify(recs)
    assert res.predictions == [False, False, False]
    assert res.accuracy == pytest.approx(2 / 3)


def test_median_split_is_per_subject():
    recs = [("A", "truthful", 1), ("A", "deceptive", 2), ("B", "truthful", 10), ("B", "deceptive", 20)]
    assert median_threshold_classify(recs).accuracy == 1.0


def test_median_split_needs_two_responses():
    with pytest.raises(InvalidInputError):
        median_threshold_classify([("A", "truthful", 1.0)])
