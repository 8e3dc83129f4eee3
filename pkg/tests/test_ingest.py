import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gazekit.errors import EmptyRecording, EmptySource, MissingColumn, NonMonotonicTime
from gazekit.ingest import (
    GazeSample,
    Recording,
    RecordingMeta,
    Schema,
    dumps_canonical,
    filter_trials,
    load_config_file,
    load_schema,
    loads_canonical,
    parse_recording,
    tracking_ratio,
)

SCHEMA = Schema.from_mapping({
    "columns": {"t_us": "Time", "por_x": "X", "por_y": "Y", "pupil_diam_l": "PupilL"},
    "time_unit": "ms",
    "validity_column": "Valid",
})
META = RecordingMeta("S1", "T1", 250.0, 40.0, "expert")


def log_text(rows, sep=","):
    lines = [sep.join(["Time", "X", "Y", "PupilL", "Valid"])]
    lines += [sep.join(str(c) for c in r) for r in rows]
    return "\n".join(lines) + "\n"


def test_parse_basic_comma_and_units():
    rec = parse_recording(log_text([(0, 10, 20, 3.1, 1), (4, 11, 21, 3.2, 1)]), SCHEMA, META)
    assert rec.t_us.tolist() == [0, 4000]
    assert rec.por_x.tolist() == [10.0, 11.0]
    assert rec.class_label == "Expert"
    assert rec.valid.all()


def test_parse_tab_delimited_bytes_with_bom():
    raw = ("\ufeff" + log_text([(0, 1, 2, 3, 1), (4, 1, 2, 3, 0)], sep="\t")).encode()
    rec = parse_recording(raw, SCHEMA, META)
    assert rec.valid.tolist() == [True, False]


def test_unparseable_gaze_cell_marks_sample_invalid():
    rec = parse_recording(log_text([(0, "x", 2, 3, 1), (4, 1, 2, 3, 1)]), SCHEMA, META)
    assert rec.valid.tolist() == [False, True]
    assert math.isnan(rec.por_x[0])


def test_zero_gaze_is_invalid():
    rec = parse_recording(log_text([(0, 0, 0, 3, 1), (4, 1, 2, 3, 1)]), SCHEMA, META)
    assert not rec.valid[0]


def test_unparseable_timestamp_row_skipped():
    rec = parse_recording(log_text([("abc", 1, 2, 3, 1), (4, 1, 2, 3, 1)]), SCHEMA, META)
    assert len(rec) == 1


def test_missing_column_raises():
    with pytest.raises(MissingColumn):
        parse_recording("Time,X\n0,1\n", SCHEMA, META)


def test_schema_requires_core_fields():
    with pytest.raises(MissingColumn):
        Schema.from_mapping({"columns": {"t_us": "T", "por_x": "X"}})


def test_empty_source():
    with pytest.raises(EmptySource):
        parse_recording("", SCHEMA, META)
    with pytest.raises(EmptySource):
        parse_recording("Time,X,Y,PupilL,Valid\n", SCHEMA, META)


def test_non_monotonic_time_rejected():
    with pytest.raises(NonMonotonicTime):
        parse_recording(log_text([(4, 1, 2, 3, 1), (0, 1, 2, 3, 1)]), SCHEMA, META)


def test_dropouts_detected():
    rows = [(0, 1, 2, 3, 1), (4, 1, 2, 3, 1), (40, 1, 2, 3, 1)]
    rec = parse_recording(log_text(rows), SCHEMA, META)
    assert rec.dropouts.tolist() == [1]


def test_schema_from_json_and_toml(tmp_path):
    j = tmp_path / "s.json"
    j.write_text(json.dumps({"columns": {"t_us": "a", "por_x": "b", "por_y": "c"}}))
    t = tmp_path / "s.toml"
    t.write_text('time_unit = "s"\n[columns]\nt_us = "a"\npor_x = "b"\npor_y = "c"\n')
    assert load_schema(j).columns["por_x"] == "b"
    assert load_schema(t).time_unit == "s"
    assert load_config_file(t)["columns"]["t_us"] == "a"


def _rec(n=5, valid=None):
    data = np.full((n, 10), np.nan)
    data[:, 0] = np.arange(n) + 1.0
    data[:, 1] = 2.0
    return Recording("S", "T", 100.0, 40.0, np.arange(n) * 10_000, data,
                     np.ones(n, bool) if valid is None else valid)


def test_canonical_round_trip_preserves_nan_and_validity():
    rec = _rec(valid=np.array([True, False, True, True, True]))
    back = loads_canonical(dumps_canonical(rec))
    assert np.array_equal(back.t_us, rec.t_us)
    assert np.array_equal(back.valid, rec.valid)
    assert np.allclose(back.data, rec.data, equal_nan=True)
    assert back.meta() == rec.meta()


def test_canonical_rejects_foreign_format():
    with pytest.raises(ValueError):
        loads_canonical('{"format": "other"}\n')


def test_tracking_ratio_and_filter():
    good = _rec()
    bad = _rec(valid=np.array([True, False, False, True, True]))
    assert tracking_ratio(bad) == pytest.approx(0.6)
    kept, dropped = filter_trials([good, bad], 0.75)
    assert kept == [good]
    assert dropped[0].recording is bad
    with pytest.raises(EmptyRecording):
        tracking_ratio(Recording("S", "T", 100.0, 40.0, [], np.empty((0, 10)), []))


def test_recording_iterates_samples():
    rec = _rec(3)
    samples = list(rec)
    assert isinstance(samples[0], GazeSample)
    assert samples[2].por_x == 3.0


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(-1e4, 1e4), st.floats(-1e4, 1e4), st.booleans()),
                min_size=1, max_size=40))
def test_canonical_round_trip_property(rows):
    n = len(rows)
    data = np.full((n, 10), np.nan)
    data[:, 0] = [r[0] for r in rows]
    data[:, 1] = [r[1] for r in rows]
    rec = Recording("S", "T", 100.0, 40.0, np.arange(n) * 10_000, data, [r[2] for r in rows])
    back = loads_canonical(dumps_canonical(rec))
    assert np.array_equal(back.valid, rec.valid)
    assert np.array_equal(back.data, rec.data, equal_nan=True)
