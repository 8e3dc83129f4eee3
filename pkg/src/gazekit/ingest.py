"""Tracker-log ingestion: delimited text to validated recordings.

A :class:`Recording` stores its samples column-wise in numpy arrays. Absent
optional channels (pupil, gyroscope, accelerometer) are NaN. Two tracker
conventions are enforced at construction time: a point of regard of exactly
(0, 0) is an error encoding and flags the sample invalid, and a non-positive
pupil diameter is treated as absent.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator, Mapping

import numpy as np

from .errors import EmptyRecording, EmptySource, MissingColumn, NonMonotonicTime
from .labels import normalize_label

log = logging.getLogger(__name__)

SAMPLE_FIELDS = (
    "por_x",
    "por_y",
    "pupil_diam_l",
    "pupil_diam_r",
    "gyro_x",
    "gyro_y",
    "gyro_z",
    "accel_x",
    "accel_y",
    "accel_z",
)
REQUIRED_FIELDS = ("t_us", "por_x", "por_y")
FIELD_INDEX = {name: i for i, name in enumerate(SAMPLE_FIELDS)}

TIME_UNITS = {"s": 1e6, "ms": 1e3, "us": 1.0, "ns": 1e-3}

# gaps longer than this many nominal periods are dropout segments
DROPOUT_FACTOR = 3.0

CANONICAL_FORMAT = "gazekit.recording"
CANONICAL_VERSION = 1


@dataclass(frozen=True)
class GazeSample:
    t_us: int
    por_x: float
    por_y: float
    pupil_diam_l: float = math.nan
    pupil_diam_r: float = math.nan
    gyro_x: float = math.nan
    gyro_y: float = math.nan
    gyro_z: float = math.nan
    accel_x: float = math.nan
    accel_y: float = math.nan
    accel_z: float = math.nan
    valid: bool = True

    def values(self):
        return tuple(getattr(self, f) for f in SAMPLE_FIELDS)


@dataclass(frozen=True, eq=False)
class Recording:
    """One trial of tracker samples plus its metadata.

    ``data`` has one row per sample and one column per entry of
    :data:`SAMPLE_FIELDS`. Arrays are copied and made read-only.
    """

    subject_id: str
    trial_id: str
    sampling_rate_hz: float
    px_per_degree: float
    t_us: np.ndarray
    data: np.ndarray
    valid: np.ndarray
    class_label: str | None = None
    dropouts: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.sampling_rate_hz > 0:
            raise ValueError("sampling_rate_hz must be positive")
        if not self.px_per_degree > 0:
            raise ValueError("px_per_degree must be positive")
        t = np.asarray(self.t_us, dtype=np.int64).copy()
        data = np.array(self.data, dtype=np.float64, ndmin=2).copy()
        if t.size == 0:
            data = data.reshape(0, len(SAMPLE_FIELDS))
        valid = np.asarray(self.valid, dtype=bool).copy()
        if data.shape != (t.size, len(SAMPLE_FIELDS)) or valid.shape != t.shape:
            raise ValueError("t_us, data and valid disagree in length")
        steps = np.diff(t)
        if np.any(steps <= 0):
            k = int(np.argmax(steps <= 0))
            raise NonMonotonicTime(
                f"timestamp {t[k + 1]} at row {k + 1} does not follow {t[k]}"
            )
        zero = (data[:, 0] == 0.0) & (data[:, 1] == 0.0)
        valid &= ~zero & np.isfinite(data[:, 0]) & np.isfinite(data[:, 1])
        pupils = data[:, 2:4]
        pupils[~(pupils > 0)] = np.nan
        period_us = 1e6 / self.sampling_rate_hz
        dropouts = np.flatnonzero(steps > DROPOUT_FACTOR * period_us)
        for arr in (t, data, valid, dropouts):
            arr.setflags(write=False)
        object.__setattr__(self, "t_us", t)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "valid", valid)
        object.__setattr__(self, "dropouts", dropouts)
        object.__setattr__(self, "class_label", normalize_label(self.class_label))

    @classmethod
    def from_samples(cls, samples: Iterable[GazeSample], **meta) -> "Recording":
        samples = list(samples)
        t = np.array([s.t_us for s in samples], dtype=np.int64)
        data = np.array([s.values() for s in samples], dtype=np.float64)
        valid = np.array([s.valid for s in samples], dtype=bool)
        return cls(t_us=t, data=data.reshape(len(samples), len(SAMPLE_FIELDS)),
                   valid=valid, **meta)

    def __len__(self):
        return int(self.t_us.size)

    def __iter__(self) -> Iterator[GazeSample]:
        for i in range(len(self)):
            yield self.sample(i)

    def sample(self, i: int) -> GazeSample:
        row = self.data[i]
        return GazeSample(int(self.t_us[i]), *(float(v) for v in row),
                          valid=bool(self.valid[i]))

    def column(self, name: str) -> np.ndarray:
        if name == "t_us":
            return self.t_us
        return self.data[:, FIELD_INDEX[name]]

    @property
    def por_x(self):
        return self.data[:, 0]

    @property
    def por_y(self):
        return self.data[:, 1]

    @property
    def duration_s(self) -> float:
        if len(self) < 2:
            return 0.0
        return (int(self.t_us[-1]) - int(self.t_us[0])) / 1e6

    def meta(self) -> dict:
        return {
            "subject_id": self.subject_id,
            "trial_id": self.trial_id,
            "class_label": self.class_label,
            "sampling_rate_hz": self.sampling_rate_hz,
            "px_per_degree": self.px_per_degree,
        }

    def replace(self, **changes) -> "Recording":
        kw = self.meta()
        kw.update(t_us=self.t_us, data=self.data, valid=self.valid)
        kw.update(changes)
        return Recording(**kw)


@dataclass(frozen=True)
class RecordingMeta:
    subject_id: str
    trial_id: str
    sampling_rate_hz: float
    px_per_degree: float
    class_label: str | None = None


@dataclass(frozen=True)
class Schema:
    """Maps GazeSample field names to source header names.

    ``validity_column`` is optional; when given, a row is valid only if the
    cell's stripped text is in ``valid_values``.
    """

    columns: Mapping[str, str]
    time_unit: str = "us"
    validity_column: str | None = None
    valid_values: frozenset = frozenset({"1", "true", "True", "TRUE", "valid"})

    def __post_init__(self):
        for name in REQUIRED_FIELDS:
            if name not in self.columns:
                raise MissingColumn(f"schema maps no column to required field {name!r}")
        unknown = set(self.columns) - set(REQUIRED_FIELDS) - set(SAMPLE_FIELDS)
        if unknown:
            raise ValueError(f"schema names unknown fields: {sorted(unknown)}")
        if self.time_unit not in TIME_UNITS:
            raise ValueError(f"time_unit must be one of {sorted(TIME_UNITS)}")

    @classmethod
    def from_mapping(cls, mapping: Mapping) -> "Schema":
        mapping = dict(mapping)
        columns = mapping.pop("columns", None)
        if columns is None:
            raise MissingColumn("schema descriptor has no 'columns' table")
        valid_values = mapping.pop("valid_values", None)
        kw = dict(mapping)
        if valid_values is not None:
            kw["valid_values"] = frozenset(str(v) for v in valid_values)
        return cls(columns=dict(columns), **kw)


def load_config_file(path) -> dict:
    """Read a JSON or TOML mapping file, chosen by extension."""
    path = Path(path)
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # python < 3.11
            import tomli as tomllib
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def load_schema(path) -> Schema:
    return Schema.from_mapping(load_config_file(path))


def _as_text(source) -> str:
    if isinstance(source, (bytes, bytearray)):
        return bytes(source).decode("utf-8-sig")
    if isinstance(source, str):
        return source
    raw = source.read()
    if isinstance(raw, bytes):
        return raw.decode("utf-8-sig")
    return raw.lstrip("\ufeff")


def _to_float(cell: str) -> float:
    cell = cell.strip()
    if not cell:
        return math.nan
    return float(cell)


def parse_recording(source: bytes | str | IO, schema: Schema, meta: RecordingMeta) -> Recording:
    """Parse a comma- or tab-delimited table with a header row.

    ``source`` is raw bytes, already-decoded text, or a file object. Rows whose
    timestamp parses but whose gaze cells do not become invalid samples.
    Rows with an unparseable timestamp are skipped with a warning.
    """
    text = _as_text(source)
    lines = text.splitlines()
    while lines and not lines[0].strip():
        lines.pop(0)
    if not lines:
        raise EmptySource("source has no header row")
    delimiter = "\t" if "\t" in lines[0] else ","
    reader = csv.reader(io.StringIO("\n".join(lines)), delimiter=delimiter)
    header = [h.strip() for h in next(reader)]
    pos = {name: i for i, name in enumerate(header)}
    wanted = dict(schema.columns)
    if schema.validity_column is not None:
        wanted["__valid__"] = schema.validity_column
    for fname, col in wanted.items():
        if col not in pos:
            raise MissingColumn(f"column {col!r} (for {fname}) not in header {header}")

    scale = TIME_UNITS[schema.time_unit]
    t_col = pos[schema.columns["t_us"]]
    field_cols = [(FIELD_INDEX[f], pos[c]) for f, c in schema.columns.items() if f != "t_us"]
    valid_col = pos.get(schema.validity_column) if schema.validity_column else None

    ts, rows, flags = [], [], []
    for lineno, cells in enumerate(reader, start=2):
        if not any(c.strip() for c in cells):
            continue
        try:
            t = int(round(float(cells[t_col]) * scale))
        except (ValueError, IndexError):
            log.warning("line %d: unparseable timestamp, row skipped", lineno)
            continue
        row = [math.nan] * len(SAMPLE_FIELDS)
        ok = True
        for fi, ci in field_cols:
            try:
                row[fi] = _to_float(cells[ci])
            except (ValueError, IndexError):
                row[fi] = math.nan
                ok = False
        if not (math.isfinite(row[0]) and math.isfinite(row[1])):
            ok = False
        if valid_col is not None:
            try:
                ok = ok and cells[valid_col].strip() in schema.valid_values
            except IndexError:
                ok = False
        ts.append(t)
        rows.append(row)
        flags.append(ok)
    if not ts:
        raise EmptySource("source has a header but no data rows")
    return Recording(
        subject_id=meta.subject_id,
        trial_id=meta.trial_id,
        class_label=meta.class_label,
        sampling_rate_hz=meta.sampling_rate_hz,
        px_per_degree=meta.px_per_degree,
        t_us=np.array(ts, dtype=np.int64),
        data=np.array(rows, dtype=np.float64),
        valid=np.array(flags, dtype=bool),
    )


def _json_float(v: float):
    return None if math.isnan(v) else float(v)


def write_canonical(rec: Recording, fh: IO[str]) -> None:
    """Newline-delimited JSON: one metadata object, then one object per sample."""
    header = {"format": CANONICAL_FORMAT, "version": CANONICAL_VERSION, **rec.meta()}
    fh.write(json.dumps(header) + "\n")
    for i in range(len(rec)):
        obj = {"t_us": int(rec.t_us[i])}
        for name, v in zip(SAMPLE_FIELDS, rec.data[i]):
            obj[name] = _json_float(v)
        obj["valid"] = bool(rec.valid[i])
        fh.write(json.dumps(obj) + "\n")


def dumps_canonical(rec: Recording) -> str:
    buf = io.StringIO()
    write_canonical(rec, buf)
    return buf.getvalue()


def iter_canonical(fh: IO[str]) -> tuple[dict, Iterator[GazeSample]]:
    """Read the header eagerly and return a lazy sample iterator.

    Used by the streaming detector so standard input can be consumed
    incrementally.
    """
    first = fh.readline()
    if not first.strip():
        raise EmptySource("canonical recording has no metadata line")
    header = json.loads(first)
    if header.get("format") != CANONICAL_FORMAT:
        raise ValueError(f"not a canonical recording: format={header.get('format')!r}")

    def samples():
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            vals = [math.nan if obj.get(f) is None else float(obj[f]) for f in SAMPLE_FIELDS]
            yield GazeSample(int(obj["t_us"]), *vals, valid=bool(obj.get("valid", True)))

    return header, samples()


def read_canonical(fh: IO[str]) -> Recording:
    header, samples = iter_canonical(fh)
    meta = {k: header[k] for k in ("subject_id", "trial_id", "class_label",
                                   "sampling_rate_hz", "px_per_degree")}
    return Recording.from_samples(samples, **meta)


def loads_canonical(text: str) -> Recording:
    return read_canonical(io.StringIO(text))


def tracking_ratio(rec: Recording) -> float:
    if len(rec) == 0:
        raise EmptyRecording(f"{rec.subject_id}/{rec.trial_id} has no samples")
    return float(np.count_nonzero(rec.valid)) / len(rec)


@dataclass(frozen=True)
class DroppedTrial:
    recording: Recording
    ratio: float
    reason: str


def filter_trials(recs: Iterable[Recording], min_ratio: float = 0.75):
    """Split recordings into (kept, dropped) by tracking ratio.

    Empty recordings are always dropped.
    """
    if not 0.0 <= min_ratio <= 1.0:
        raise ValueError("min_ratio must lie in [0, 1]")
    kept, dropped = [], []
    for rec in recs:
        if len(rec) == 0:
            dropped.append(DroppedTrial(rec, math.nan, "empty recording"))
            continue
        ratio = tracking_ratio(rec)
        if ratio >= min_ratio:
            kept.append(rec)
        else:
            dropped.append(DroppedTrial(
                rec, ratio, f"tracking ratio {ratio:.3f} below {min_ratio:.3f}"))
    return kept, dropped
