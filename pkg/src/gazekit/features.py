"""Per-trial feature vectors, pupil/head-motion metrics and online delta samples."""

from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptySegment, EmptyTrial, NoMotionData, NoPupilData, QueueNotFull
from .events import EventKind, GazeEvent
from .ingest import SAMPLE_FIELDS, GazeSample, Recording

STATS = ("mean", "std", "min", "max")

# (feature prefix, event kind, GazeEvent attribute)
BASE_MEASURES = (
    ("fixation_duration_ms", EventKind.FIXATION, "duration_ms"),
    ("fixation_dispersion_px", EventKind.FIXATION, "dispersion_px"),
    ("saccade_duration_ms", EventKind.SACCADE, "duration_ms"),
    ("saccade_amplitude_deg", EventKind.SACCADE, "amplitude_deg"),
    ("saccade_mean_accel_dps2", EventKind.SACCADE, "mean_accel_dps2"),
    ("saccade_peak_accel_dps2", EventKind.SACCADE, "peak_accel_dps2"),
    ("saccade_peak_decel_dps2", EventKind.SACCADE, "peak_decel_dps2"),
    ("saccade_mean_velocity_dps", EventKind.SACCADE, "mean_velocity_dps"),
    ("saccade_peak_velocity_dps", EventKind.SACCADE, "peak_velocity_dps"),
    ("pursuit_duration_ms", EventKind.SMOOTH_PURSUIT, "duration_ms"),
    ("pursuit_dispersion_px", EventKind.SMOOTH_PURSUIT, "dispersion_px"),
)
_MEASURE = {m[0]: m for m in BASE_MEASURES}
FREQUENCIES = ("fixation_frequency_hz", "saccade_frequency_hz")

SOCCER46 = "Soccer46"
SURGEON38 = "Surgeon38"

SURGEON_EVENT_MEASURES = (
    "fixation_duration_ms",
    "saccade_duration_ms",
    "pursuit_dispersion_px",
    "saccade_amplitude_deg",
    "saccade_peak_velocity_dps",
)
SURGEON_SIGNAL_MEASURES = ("pupil_diam", "gyro_x", "gyro_y", "gyro_z")


def _expand(prefixes):
    return tuple(f"{p}_{s}" for p in prefixes for s in STATS)


SCHEMAS = {
    SOCCER46: FREQUENCIES + _expand(m[0] for m in BASE_MEASURES),
    SURGEON38: FREQUENCIES + _expand(SURGEON_EVENT_MEASURES) + _expand(SURGEON_SIGNAL_MEASURES),
}

ONLINE_FIELDS = (
    "por_x", "por_y", "pupil_diam",
    "gyro_x", "gyro_y", "gyro_z",
    "accel_x", "accel_y", "accel_z",
)
DEFAULT_QUEUE_CAPACITY = 2000


@dataclass(frozen=True, eq=False)
class TrialFeatures:
    """A named feature vector for one trial.

    ``missing`` marks entries that are undefined for the trial (for example
    pursuit statistics when no pursuit occurred); their ``values`` are NaN.
    """

    subject_id: str
    trial_id: str
    class_label: str | None
    profile: str
    names: tuple[str, ...]
    values: np.ndarray
    missing: np.ndarray

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.names.index(name)])

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values.tolist()))


def summarize(values) -> tuple[float, float, float, float]:
    """Mean, population std, min and max; NaNs for an empty input."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return (math.nan,) * 4
    lo, hi = float(v.min()), float(v.max())
    mean = min(max(float(v.mean()), lo), hi)
    return mean, float(v.std()), lo, hi


def _mean_pupil(data: np.ndarray) -> np.ndarray:
    pupil = data[:, 2:4]
    n = np.isfinite(pupil).sum(axis=1)
    return np.where(n > 0, np.nansum(pupil, axis=1) / np.maximum(n, 1), np.nan)


def _event_stats(events, prefix):
    _, kind, attr = _MEASURE[prefix]
    return summarize([getattr(e, attr) for e in events if e.kind is kind])


def _signal_stats(rec: Recording, name: str):
    col = _mean_pupil(rec.data) if name == "pupil_diam" else rec.column(name)
    col = col[rec.valid & np.isfinite(col)]
    return summarize(col)


def extract_trial_features(events: Sequence[GazeEvent], rec: Recording,
                           profile: str = SOCCER46) -> TrialFeatures:
    """Reduce one trial's events (and, for Surgeon38, its signals) to a feature vector."""
    if profile not in SCHEMAS:
        raise ValueError(f"unknown feature profile {profile!r}")
    if not events:
        raise EmptyTrial(f"{rec.subject_id}/{rec.trial_id}: no events")
    duration = rec.duration_s
    if not duration > 0:
        raise EmptyTrial(f"{rec.subject_id}/{rec.trial_id}: zero trial duration")

    n_fix = sum(e.kind is EventKind.FIXATION for e in events)
    n_sac = sum(e.kind is EventKind.SACCADE for e in events)
    values = [n_fix / duration, n_sac / duration]
    if profile == SOCCER46:
        for prefix, _, _ in BASE_MEASURES:
            values.extend(_event_stats(events, prefix))
    else:
        for prefix in SURGEON_EVENT_MEASURES:
            values.extend(_event_stats(events, prefix))
        for name in SURGEON_SIGNAL_MEASURES:
            values.extend(_signal_stats(rec, name))
    arr = np.array(values, dtype=float)
    return TrialFeatures(
        subject_id=rec.subject_id,
        trial_id=rec.trial_id,
        class_label=rec.class_label,
        profile=profile,
        names=SCHEMAS[profile],
        values=arr,
        missing=~np.isfinite(arr),
    )


def write_feature_table(rows: Sequence[TrialFeatures]) -> tuple[str, dict]:
    """Render rows as CSV text plus the missing-value mask document.

    Missing cells are left empty in the CSV; the mask lists them explicitly so
    a reader never has to guess whether an empty cell means zero.
    """
    if not rows:
        raise ValueError("no feature rows")
    names = rows[0].names
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("subject_id", "trial_id", "class_label") + names)
    missing = {}
    for i, r in enumerate(rows):
        if r.names != names:
            raise ValueError("rows mix feature schemas")
        cells = ["" if m else repr(float(v)) for v, m in zip(r.values, r.missing)]
        w.writerow([r.subject_id, r.trial_id, r.class_label or ""] + cells)
        if r.missing.any():
            missing[str(i)] = [n for n, m in zip(names, r.missing) if m]
    mask = {"profile": rows[0].profile, "columns": list(names), "missing": missing}
    return buf.getvalue(), mask


def _window(rec: Recording, window) -> np.ndarray:
    start, end = window
    return (rec.t_us >= start) & (rec.t_us <= end)


def pcpd(rec: Recording, baseline_window, event_window) -> tuple[float, float]:
    """Percentage change in pupil diameter per eye, positive for dilation.

    Windows are inclusive ``(start_us, end_us)`` pairs. An eye without data
    in either window yields NaN; if neither eye has data, NoPupilData.
    """
    out = []
    for col in (2, 3):
        d = rec.data[:, col]
        good = rec.valid & np.isfinite(d)
        base = d[good & _window(rec, baseline_window)]
        ev = d[good & _window(rec, event_window)]
        if base.size == 0 or ev.size == 0:
            out.append(math.nan)
            continue
        b = base.mean()
        out.append(float((ev.mean() - b) / b * 100.0))
    if all(math.isnan(v) for v in out):
        raise NoPupilData("no valid pupil samples in baseline or event window")
    return out[0], out[1]


MOTION_FIELDS = ("gyro_x", "gyro_y", "gyro_z", "accel_x", "accel_y", "accel_z")


def head_motion_range(rec: Recording, window) -> dict[str, float]:
    """Per-axis max - min of the head-motion channels inside ``window``."""
    inside = _window(rec, window)
    out = {}
    for name in MOTION_FIELDS:
        col = rec.column(name)[inside]
        col = col[np.isfinite(col)]
        out[name] = float(col.max() - col.min()) if col.size else math.nan
    if all(math.isnan(v) for v in out.values()):
        raise NoMotionData("no gyroscope/accelerometer samples in window")
    return out


def aoi_fixation_ratio(tagged: Iterable[tuple[GazeEvent, str]], segment_start_us: int,
                       segment_end_us: int, phase_split: float = 0.8) -> dict[str, Counter]:
    """Count fixations per AOI tag in the approach and zeroing phases.

    The approach phase is the first ``phase_split`` of the segment's time; a
    fixation belongs to the phase containing its temporal midpoint. AOI tags
    are supplied by the caller.
    """
    if segment_end_us <= segment_start_us:
        raise EmptySegment("segment has no duration")
    if not 0.0 <= phase_split <= 1.0:
        raise ValueError("phase_split must lie in [0, 1]")
    boundary = segment_start_us + phase_split * (segment_end_us - segment_start_us)
    phases = {"approach": Counter(), "zeroing": Counter()}
    n = 0
    for ev, tag in tagged:
        if ev.kind is not EventKind.FIXATION:
            continue
        mid = (ev.start_us + ev.end_us) / 2
        if not segment_start_us <= mid <= segment_end_us:
            continue
        phases["approach" if mid < boundary else "zeroing"][tag] += 1
        n += 1
    if n == 0:
        raise EmptySegment("no tagged fixations inside the segment")
    return phases


def phase_shares(counts: Counter) -> dict[str, float]:
    total = sum(counts.values())
    return {k: v / total for k, v in counts.items()} if total else {}


@dataclass(frozen=True)
class DeltaSample:
    values: np.ndarray
    counts: np.ndarray
    invalid_fraction: float
    names: tuple[str, ...] = ONLINE_FIELDS

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values.tolist()))

    @property
    def finite(self) -> bool:
        return bool(np.isfinite(self.values).all())


def _contribution(values: np.ndarray, valid: bool):
    if not valid:
        return np.zeros_like(values), np.zeros(values.shape, dtype=bool)
    ok = np.isfinite(values)
    return np.where(ok, values, 0.0), ok


def _combine(sums: np.ndarray, counts: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore", divide="ignore"):
        means = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    pupil = means[2:4]
    pd = float(np.nanmean(pupil)) if np.isfinite(pupil).any() else math.nan
    return np.concatenate((means[:2], [pd], means[4:]))


class SampleQueue:
    """Fixed-capacity ring buffer of samples with running per-field sums.

    Invalid samples occupy a slot but contribute to no field. Sums are
    recomputed exactly once per ``capacity`` pushes to bound drift.
    """

    def __init__(self, capacity: int = DEFAULT_QUEUE_CAPACITY):
        if capacity < 2:
            raise ValueError("queue capacity must be at least 2")
        self.capacity = int(capacity)
        width = len(SAMPLE_FIELDS)
        self._vals = np.zeros((self.capacity, width))
        self._ok = np.zeros((self.capacity, width), dtype=bool)
        self._valid = np.zeros(self.capacity, dtype=bool)
        self._t = np.zeros(self.capacity, dtype=np.int64)
        self._sums = np.zeros(width)
        self._counts = np.zeros(width, dtype=np.int64)
        self._head = 0
        self._size = 0
        self._since_exact = 0

    def __len__(self):
        return self._size

    @property
    def is_full(self) -> bool:
        return self._size == self.capacity

    def push(self, sample: GazeSample) -> None:
        vals, ok = _contribution(np.asarray(sample.values(), dtype=float), sample.valid)
        slot = self._head
        if self.is_full:
            self._sums -= self._vals[slot]
            self._counts -= self._ok[slot]
        else:
            self._size += 1
        self._vals[slot] = vals
        self._ok[slot] = ok
        self._valid[slot] = sample.valid
        self._t[slot] = sample.t_us
        self._sums += vals
        self._counts += ok
        self._head = (slot + 1) % self.capacity
        self._since_exact += 1
        if self._since_exact >= self.capacity:
            self._sums = self._vals.sum(axis=0)
            self._since_exact = 0

    def _order(self) -> np.ndarray:
        if not self.is_full:
            return np.arange(self._size)
        return (np.arange(self.capacity) + self._head) % self.capacity

    def timestamps(self) -> np.ndarray:
        return self._t[self._order()]

    def contributions(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(values, contributes-mask, valid) for the queued samples, oldest first."""
        idx = self._order()
        return self._vals[idx], self._ok[idx], self._valid[idx]

    @property
    def newest_t_us(self) -> int:
        return int(self._t[(self._head - 1) % self.capacity])

    @property
    def invalid_fraction(self) -> float:
        return 1.0 - float(self._valid.sum()) / self._size if self._size else 0.0

    def running_delta(self) -> DeltaSample:
        if not self.is_full:
            raise QueueNotFull(f"queue holds {self._size} of {self.capacity} samples")
        return DeltaSample(_combine(self._sums, self._counts), self._counts.copy(),
                           self.invalid_fraction)


def delta_sample(queue: SampleQueue) -> DeltaSample:
    """Per-field mean over a full queue.

    The pupil entry is the mean of the two eyes' window means.
    """
    return queue.running_delta()


def delta_sample_exact(samples: Sequence[GazeSample]) -> DeltaSample:
    """Direct delta-sample computation from a list of samples."""
    if not samples:
        raise QueueNotFull("no samples")
    vals = np.array([s.values() for s in samples], dtype=float)
    valid = np.array([s.valid for s in samples], dtype=bool)
    ok = np.isfinite(vals) & valid[:, None]
    sums = np.array([math.fsum(vals[ok[:, j], j]) for j in range(vals.shape[1])])
    counts = ok.sum(axis=0)
    return DeltaSample(_combine(sums, counts), counts, 1.0 - valid.mean())


def online_vector(sample: GazeSample) -> np.ndarray:
    """The 9 online features of a single sample (pupil = mean of both eyes)."""
    v = np.asarray(sample.values(), dtype=float)
    pupil = v[2:4]
    pd = float(np.nanmean(pupil)) if np.isfinite(pupil).any() else math.nan
    return np.concatenate((v[:2], [pd], v[4:]))


def online_matrix(rec: Recording) -> np.ndarray:
    """Online features for every sample of a recording, shape (n, 9)."""
    d = rec.data
    return np.column_stack((d[:, 0], d[:, 1], _mean_pupil(d), d[:, 4:]))


def feature_mask_json(mask: dict) -> str:
    return json.dumps(mask, indent=2, sort_keys=True)


__all__ = [
    "BASE_MEASURES", "DeltaSample", "ONLINE_FIELDS", "SCHEMAS", "SOCCER46", "SURGEON38",
    "SampleQueue", "TrialFeatures", "aoi_fixation_ratio", "delta_sample",
    "delta_sample_exact", "extract_trial_features", "head_motion_range", "online_matrix",
    "online_vector", "pcpd", "phase_shares", "summarize", "write_feature_table",
]
