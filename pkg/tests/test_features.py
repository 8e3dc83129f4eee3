import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gazekit.errors import EmptySegment, EmptyTrial, NoMotionData, NoPupilData, QueueNotFull
from gazekit.events import EventKind, GazeEvent
from gazekit.features import (
    ONLINE_FIELDS,
    SCHEMAS,
    SOCCER46,
    SURGEON38,
    SampleQueue,
    aoi_fixation_ratio,
    delta_sample_exact,
    extract_trial_features,
    head_motion_range,
    online_matrix,
    pcpd,
    summarize,
    write_feature_table,
)
from gazekit.ingest import GazeSample, Recording
from gazekit.synth import gen_aoi_segment, gen_head_motion


def rec_with(n=100, pupil=3.0, rate=100.0):
    data = np.full((n, 10), np.nan)
    data[:, 0:2] = 500.0
    data[:, 2:4] = pupil
    t = np.arange(n, dtype=np.int64) * int(1e6 / rate)
    return Recording("S", "T", rate, 40.0, t, data, np.ones(n, bool), "Novice")


def fix(start, end, disp=10.0):
    return GazeEvent(EventKind.FIXATION, start, end, 0, 1, 0.0, 0.0, disp)


def test_schema_sizes():
    assert len(SCHEMAS[SOCCER46]) == 46
    assert len(SCHEMAS[SURGEON38]) == 38
    assert len(ONLINE_FIELDS) == 9
    assert len(set(SCHEMAS[SOCCER46])) == 46


def test_missing_pursuit_features_are_marked_not_zeroed():
    rec = rec_with()
    tf = extract_trial_features([fix(0, 100_000)], rec)
    assert tf["fixation_duration_ms_mean"] == 100.0
    assert math.isnan(tf["pursuit_duration_ms_mean"])
    assert tf.missing[tf.names.index("pursuit_duration_ms_mean")]
    csv_text, mask = write_feature_table([tf])
    assert mask["missing"]["0"][0].startswith("saccade")
    assert ",," in csv_text


def test_empty_trial():
    with pytest.raises(EmptyTrial):
        extract_trial_features([], rec_with())
    with pytest.raises(ValueError):
        extract_trial_features([fix(0, 1)], rec_with(), "Bogus")


def test_summarize_population_std():
    m, s, lo, hi = summarize([1.0, 3.0])
    assert (m, s, lo, hi) == (2.0, 1.0, 1.0, 3.0)
    assert all(math.isnan(v) for v in summarize([]))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50))
def test_summarize_orders_min_mean_max(vals):
    m, s, lo, hi = summarize(vals)
    assert lo <= m <= hi and s >= 0


def test_pcpd_sign_and_units():
    rec = rec_with(200)
    data = rec.data.copy()
    data[100:, 2:4] = 3.3
    rec = Recording("S", "T", 100.0, 40.0, rec.t_us, data, rec.valid)
    left, right = pcpd(rec, (0, 990_000), (1_000_000, 1_990_000))
    assert left == pytest.approx(10.0) and right == pytest.approx(10.0)
    data[:, 2:4] = np.nan
    rec = Recording("S", "T", 100.0, 40.0, rec.t_us, data, rec.valid)
    with pytest.raises(NoPupilData):
        pcpd(rec, (0, 990_000), (1_000_000, 1_990_000))


def test_head_motion_range_matches_generator():
    ranges = {"gyro_x": 12.0, "gyro_y": 3.5, "gyro_z": 0.0, "accel_x": 1.0}
    rec = gen_head_motion(ranges, seed=2)
    got = head_motion_range(rec, (0, int(rec.t_us[-1])))
    for k, v in ranges.items():
        assert got[k] == pytest.approx(v, abs=1e-12)
    with pytest.raises(NoMotionData):
        head_motion_range(rec_with(), (0, 10**9))


def test_aoi_phase_counts():
    tagged, s, e = gen_aoi_segment({"inner": 6, "outer": 2}, {"inner": 1, "outer": 3}, seed=1)
    phases = aoi_fixation_ratio(tagged, s, e)
    assert phases["approach"] == {"inner": 6, "outer": 2}
    assert phases["zeroing"] == {"inner": 1, "outer": 3}
    with pytest.raises(EmptySegment):
        aoi_fixation_ratio([], 0, 10)
    with pytest.raises(EmptySegment):
        aoi_fixation_ratio(tagged, 10, 10)


def test_online_matrix_pupil_is_eye_mean():
    rec = rec_with(3)
    data = rec.data.copy()
    data[:, 2] = [2.0, 2.0, np.nan]
    data[:, 3] = [4.0, np.nan, 5.0]
    rec = Recording("S", "T", 100.0, 40.0, rec.t_us, data, rec.valid)
    assert online_matrix(rec)[:, 2].tolist() == [3.0, 2.0, 5.0]


def sample(rng, t):
    vals = [rng.uniform(0, 1000) if rng.random() > 0.1 else math.nan for _ in range(10)]
    vals[0], vals[1] = rng.uniform(1, 1900), rng.uniform(1, 1000)
    return GazeSample(t, *vals, valid=rng.random() > 0.2)


def test_queue_requires_full_window():
    q = SampleQueue(3)
    q.push(GazeSample(0, 1.0, 1.0))
    with pytest.raises(QueueNotFull):
        q.running_delta()
    with pytest.raises(ValueError):
        SampleQueue(1)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 30), st.integers(1, 200), st.integers(0, 10**6))
def test_running_delta_matches_exact(cap, extra, seed):
    rng = random.Random(seed)
    q = SampleQueue(cap)
    window = []
    for t in range(cap + extra):
        s = sample(rng, t)
        q.push(s)
        window = (window + [s])[-cap:]
        if q.is_full:
            a, b = q.running_delta(), delta_sample_exact(window)
            assert np.allclose(a.values, b.values, rtol=1e-9, atol=1e-9, equal_nan=True)
            assert np.array_equal(a.counts, b.counts)
            assert a.invalid_fraction == pytest.approx(b.invalid_fraction)
