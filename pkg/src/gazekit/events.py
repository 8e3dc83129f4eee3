"""Velocity-threshold (I-VT) event detection and saccade cleaning.

Velocities are computed per consecutive sample pair with the actual time
step. Each pair falls into one of four classes:

* fast  -- finite velocity at or above the threshold;
* slow  -- finite velocity below the threshold, both samples valid;
* undefined -- a coordinate is missing (NaN);
* broken -- the pair spans a dropout segment, or is slow with an invalid end.

A saccade is a maximal run of fast pairs, allowed to bridge undefined pairs
and to contain invalid samples (those are what the cleaning rules catch). A
fixation candidate is a maximal run of slow pairs. Neighbouring events share
their boundary sample.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import NonPositiveThreshold, TooFewSamples
from .ingest import Recording

DEFAULT_VELOCITY_THRESHOLD = 50.0
SMI_PEAK_THRESHOLD = 40.0
DEFAULT_MIN_FIXATION_MS = 50.0
SOCCER_PURSUIT_PX = 100.0
SURGEON_PURSUIT_PX = 30.0

_FAST, _SLOW, _UNDEF, _BROKEN = 0, 1, 2, 3


class EventKind(str, enum.Enum):
    FIXATION = "Fixation"
    SACCADE = "Saccade"
    SMOOTH_PURSUIT = "SmoothPursuit"


@dataclass(frozen=True)
class IvtParams:
    velocity_threshold_dps: float = DEFAULT_VELOCITY_THRESHOLD
    min_fixation_ms: float = DEFAULT_MIN_FIXATION_MS


IVT_DEFAULT = IvtParams()
SMI_PRESET = IvtParams(velocity_threshold_dps=SMI_PEAK_THRESHOLD)


@dataclass(frozen=True)
class GazeEvent:
    kind: EventKind
    start_us: int
    end_us: int
    first_index: int
    last_index: int
    centroid_x: float | None = None
    centroid_y: float | None = None
    dispersion_px: float | None = None
    amplitude_deg: float | None = None
    mean_velocity_dps: float | None = None
    peak_velocity_dps: float | None = None
    mean_accel_dps2: float | None = None
    peak_accel_dps2: float | None = None
    peak_decel_dps2: float | None = None

    @property
    def duration_ms(self) -> float:
        return (self.end_us - self.start_us) / 1000.0

    @property
    def sample_indices(self) -> range:
        return range(self.first_index, self.last_index + 1)


def dispersion(xs, ys) -> float:
    """Largest euclidean distance of any sample from the samples' centroid."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size == 0:
        raise ValueError("dispersion needs at least one sample")
    return float(np.max(np.hypot(xs - xs.mean(), ys - ys.mean())))


def pair_velocities(rec: Recording) -> np.ndarray:
    """Angular velocity in deg/s for each consecutive sample pair."""
    dx = np.diff(rec.por_x)
    dy = np.diff(rec.por_y)
    dt = np.diff(rec.t_us) / 1e6
    return np.hypot(dx, dy) / rec.px_per_degree / dt


def _classify_pairs(rec: Recording, vel: np.ndarray, threshold: float) -> np.ndarray:
    cls = np.full(vel.size, _BROKEN, dtype=np.int8)
    finite = np.isfinite(vel)
    both_valid = rec.valid[:-1] & rec.valid[1:]
    cls[~finite] = _UNDEF
    cls[finite & (vel >= threshold)] = _FAST
    cls[finite & (vel < threshold) & both_valid] = _SLOW
    cls[rec.dropouts] = _BROKEN
    return cls


def _runs(mask: np.ndarray):
    """(start, stop) half-open index pairs of the True runs in ``mask``."""
    if mask.size == 0:
        return []
    padded = np.concatenate(([False], mask, [False]))
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    return list(zip(edges[::2].tolist(), edges[1::2].tolist()))


def _saccade(rec: Recording, vel: np.ndarray, k0: int, k1: int) -> GazeEvent:
    # pairs k0..k1-1, samples k0..k1
    t = rec.t_us
    v = vel[k0:k1]
    mid_s = (t[k0:k1] + t[k0 + 1:k1 + 1]) / 2e6
    ok = np.isfinite(v)
    v, mid_s = v[ok], mid_s[ok]
    duration_s = (int(t[k1]) - int(t[k0])) / 1e6
    mean_v = float(np.mean(v))
    if v.size >= 2:
        acc = np.diff(v) / np.diff(mid_s)
        mean_a = float(np.mean(np.abs(acc)))
        peak_a = max(float(acc.max()), 0.0)
        peak_d = min(float(acc.min()), 0.0)
    else:
        mean_a = peak_a = peak_d = 0.0
    return GazeEvent(
        kind=EventKind.SACCADE,
        start_us=int(t[k0]),
        end_us=int(t[k1]),
        first_index=k0,
        last_index=k1,
        amplitude_deg=mean_v * duration_s,
        mean_velocity_dps=mean_v,
        peak_velocity_dps=float(v.max()),
        mean_accel_dps2=mean_a,
        peak_accel_dps2=peak_a,
        peak_decel_dps2=peak_d,
    )


def _fixation(rec: Recording, i0: int, i1: int) -> GazeEvent:
    xs = rec.por_x[i0:i1 + 1]
    ys = rec.por_y[i0:i1 + 1]
    return GazeEvent(
        kind=EventKind.FIXATION,
        start_us=int(rec.t_us[i0]),
        end_us=int(rec.t_us[i1]),
        first_index=i0,
        last_index=i1,
        centroid_x=float(xs.mean()),
        centroid_y=float(ys.mean()),
        dispersion_px=dispersion(xs, ys),
    )


def detect_events(
    rec: Recording,
    velocity_threshold_dps: float = DEFAULT_VELOCITY_THRESHOLD,
    min_fixation_ms: float = DEFAULT_MIN_FIXATION_MS,
) -> list[GazeEvent]:
    """Detect fixations and saccades in ``rec`` with a velocity threshold.

    Fixation candidates shorter than ``min_fixation_ms`` are dropped; their
    samples belong to no event. Returns events ordered by start time.
    """
    if not velocity_threshold_dps > 0:
        raise NonPositiveThreshold(f"velocity threshold {velocity_threshold_dps} must be > 0")
    if np.count_nonzero(rec.valid) < 2:
        raise TooFewSamples(f"{rec.subject_id}/{rec.trial_id}: fewer than 2 valid samples")
    vel = pair_velocities(rec)
    cls = _classify_pairs(rec, vel, velocity_threshold_dps)
    events = []

    for k0, k1 in _runs((cls == _FAST) | (cls == _UNDEF)):
        fast = np.flatnonzero(cls[k0:k1] == _FAST)
        if fast.size == 0:
            continue
        events.append(_saccade(rec, vel, k0 + int(fast[0]), k0 + int(fast[-1]) + 1))

    min_us = min_fixation_ms * 1000.0
    for k0, k1 in _runs(cls == _SLOW):
        if rec.t_us[k1] - rec.t_us[k0] >= min_us:
            events.append(_fixation(rec, k0, k1))

    events.sort(key=lambda e: (e.start_us, e.end_us))
    return events


def split_smooth_pursuits(
    events: Iterable[GazeEvent], dispersion_threshold_px: float = SOCCER_PURSUIT_PX
) -> list[GazeEvent]:
    """Relabel fixations whose dispersion exceeds the threshold as smooth pursuits."""
    if not dispersion_threshold_px > 0:
        raise NonPositiveThreshold("dispersion threshold must be > 0")
    out = []
    for ev in events:
        if ev.kind is EventKind.FIXATION and ev.dispersion_px > dispersion_threshold_px:
            ev = replace(ev, kind=EventKind.SMOOTH_PURSUIT)
        out.append(ev)
    return out


class RemovalReason(str, enum.Enum):
    ZERO_START = "ZeroStart"
    INVALID_INTRA_SAMPLE = "InvalidIntraSample"
    VELOCITY_LIMIT = "VelocityLimit"
    ACCEL_LIMIT = "AccelLimit"
    DECEL_LIMIT = "DecelLimit"
    SPANS_DROPOUT = "SpansDropout"


@dataclass(frozen=True)
class CleaningLimits:
    max_velocity_dps: float = 1000.0
    max_abs_accel_dps2: float = 100_000.0


@dataclass
class CleaningReport:
    kept: list[GazeEvent] = field(default_factory=list)
    removed: list[tuple[GazeEvent, tuple[RemovalReason, ...]]] = field(default_factory=list)

    @property
    def n_saccades(self) -> int:
        return len(self.removed) + sum(e.kind is EventKind.SACCADE for e in self.kept)

    def summary(self) -> dict:
        n = self.n_saccades
        per_reason = {r.value: 0 for r in RemovalReason}
        for _, reasons in self.removed:
            for r in reasons:
                per_reason[r.value] += 1
        return {
            "saccades": n,
            "removed": len(self.removed),
            "removed_fraction": len(self.removed) / n if n else 0.0,
            "per_reason": per_reason,
            "removed_events": [
                {"start_us": ev.start_us, "end_us": ev.end_us,
                 "reasons": [r.value for r in reasons]}
                for ev, reasons in self.removed
            ],
        }


def saccade_faults(ev: GazeEvent, rec: Recording,
                   limits: CleaningLimits = CleaningLimits()) -> tuple[RemovalReason, ...]:
    """All cleaning rules that fire for one saccade (empty tuple = keep)."""
    i0, i1 = ev.first_index, ev.last_index
    reasons = []
    if rec.por_x[i0] == 0.0 and rec.por_y[i0] == 0.0:
        reasons.append(RemovalReason.ZERO_START)
    if i1 - i0 >= 2 and not rec.valid[i0 + 1:i1].all():
        reasons.append(RemovalReason.INVALID_INTRA_SAMPLE)
    if ev.peak_velocity_dps > limits.max_velocity_dps:
        reasons.append(RemovalReason.VELOCITY_LIMIT)
    if abs(ev.peak_accel_dps2) > limits.max_abs_accel_dps2:
        reasons.append(RemovalReason.ACCEL_LIMIT)
    if abs(ev.peak_decel_dps2) > limits.max_abs_accel_dps2:
        reasons.append(RemovalReason.DECEL_LIMIT)
    d = rec.dropouts
    if d.size and np.any((d >= i0) & (d < i1)):
        reasons.append(RemovalReason.SPANS_DROPOUT)
    return tuple(reasons)


def clean_saccades(events: Sequence[GazeEvent], rec: Recording,
                   limits: CleaningLimits = CleaningLimits()) -> CleaningReport:
    """Remove physiologically implausible or corrupted saccades.

    Intra-saccade validity is checked on interior samples only; the start
    sample is covered by the zero-start rule.
    """
    report = CleaningReport()
    for ev in events:
        if ev.kind is not EventKind.SACCADE:
            report.kept.append(ev)
            continue
        reasons = saccade_faults(ev, rec, limits)
        if reasons:
            report.removed.append((ev, reasons))
        else:
            report.kept.append(ev)
    return report


EVENT_COLUMNS = [
    "kind", "start_us", "end_us", "duration_ms", "first_index", "last_index",
    "centroid_x", "centroid_y", "dispersion_px", "amplitude_deg",
    "mean_velocity_dps", "peak_velocity_dps", "mean_accel_dps2",
    "peak_accel_dps2", "peak_decel_dps2",
]
_INT_COLUMNS = {"start_us", "end_us", "first_index", "last_index"}


def events_to_csv(events: Iterable[GazeEvent]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EVENT_COLUMNS)
    for ev in events:
        row = asdict(ev)
        row["kind"] = ev.kind.value
        row["duration_ms"] = ev.duration_ms
        w.writerow(["" if row[c] is None else repr(row[c]) if isinstance(row[c], float)
                    else row[c] for c in EVENT_COLUMNS])
    return buf.getvalue()


def events_from_csv(text: str) -> list[GazeEvent]:
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        kw = {}
        for c in EVENT_COLUMNS:
            if c == "duration_ms":
                continue
            v = row[c]
            if c == "kind":
                kw[c] = EventKind(v)
            elif v == "":
                kw[c] = None
            elif c in _INT_COLUMNS:
                kw[c] = int(v)
            else:
                kw[c] = float(v)
        out.append(GazeEvent(**kw))
    return out


def check_event_invariants(events: Sequence[GazeEvent], n_samples: int) -> None:
    """Raise AssertionError if ordering, bounds or kinematic sign rules fail."""
    prev_end = -math.inf
    for ev in events:
        assert ev.end_us > ev.start_us, ev
        assert ev.start_us >= prev_end, "events overlap"
        assert 0 <= ev.first_index <= ev.last_index < n_samples, ev
        if ev.kind is EventKind.SACCADE:
            assert ev.peak_velocity_dps >= ev.mean_velocity_dps >= 0, ev
            assert ev.peak_decel_dps2 <= 0 <= ev.peak_accel_dps2, ev
        prev_end = ev.end_us
