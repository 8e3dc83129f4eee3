"""Synthetic recordings and datasets with known ground truth."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np
from scipy import optimize, stats

from ..datasets import Dataset
from ..events import clean_saccades, detect_events, split_smooth_pursuits
from ..features import SOCCER46, extract_trial_features
from ..ingest import SAMPLE_FIELDS, Recording
from ..labels import canonical_order
from .catalog import ClassProfile, MeasureDist, load_profile_data

# saccade pair velocities never drop below this multiple of the threshold,
# so every saccade pair is detected as fast
ONSET_FACTOR = 1.25
MIN_MEAN_FACTOR = 1.35
MAX_MEAN_VELOCITY = 420.0
PURSUIT_SPEED_FACTOR = 0.8
FIXATION_DISPERSION_FACTOR = 0.9
PURSUIT_DISPERSION_FACTOR = 1.1
CENTER = (960.0, 540.0)


# ---------------------------------------------------------------- sampling

@lru_cache(maxsize=4096)
def _calibrated_loc(target: float, sigma: float, lo: float, hi: float) -> float:
    """Location whose normal, truncated to [lo, hi], has mean ``target``."""
    if sigma == 0 or hi - lo < 1e-12:
        return min(max(target, lo), hi)
    target = min(max(target, lo + 1e-6 * (hi - lo)), hi - 1e-6 * (hi - lo))

    def gap(mu):
        a, b = (lo - mu) / sigma, (hi - mu) / sigma
        return stats.truncnorm.mean(a, b, loc=mu, scale=sigma) - target

    span = 20 * sigma + (hi - lo)
    return float(optimize.brentq(gap, lo - span, hi + span, xtol=1e-10))


def draw_measure(dist: MeasureDist, rng, size=None, lo=None, hi=None, scale: float = 1.0):
    """Truncated-normal draws whose mean matches ``dist.mean * scale``.

    ``lo``/``hi`` tighten the support beyond the profile's min/max.
    """
    lo = dist.min * scale if lo is None else max(lo, dist.min * scale)
    hi = dist.max * scale if hi is None else min(hi, dist.max * scale)
    if lo > hi:
        lo = hi
    sigma = dist.std * abs(scale)
    mu = _calibrated_loc(dist.mean * scale, sigma, lo, hi)
    if sigma == 0 or hi - lo < 1e-12:
        return np.full(size, mu) if size is not None else mu
    a, b = (lo - mu) / sigma, (hi - mu) / sigma
    return stats.truncnorm.rvs(a, b, loc=mu, scale=sigma, size=size, random_state=rng)


# ---------------------------------------------------------------- traces

@dataclass(frozen=True)
class PlantedEvent:
    kind: str
    first_index: int
    last_index: int
    start_us: int
    end_us: int

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass
class GroundTruth:
    events: list[PlantedEvent]
    class_label: str | None
    confusion_times_us: list[int] = field(default_factory=list)
    subject_offsets: dict = field(default_factory=dict)
    profile: str = ""

    def to_json(self) -> dict:
        return {"class_label": self.class_label, "profile": self.profile,
                "events": [e.to_json() for e in self.events],
                "confusion_times_us": list(self.confusion_times_us),
                "subject_offsets": self.subject_offsets}


def _timestamps(n: int, rate_hz: float) -> np.ndarray:
    return np.round(np.arange(n) * (1e6 / rate_hz)).astype(np.int64)


def _unit(rng, pos, toward_center: bool = True):
    if toward_center:
        base = math.atan2(CENTER[1] - pos[1], CENTER[0] - pos[0])
        ang = base + rng.uniform(-math.pi / 2, math.pi / 2)
    else:
        ang = rng.uniform(-math.pi, math.pi)
    return np.array([math.cos(ang), math.sin(ang)])


def _triangle_weights(m: int) -> np.ndarray:
    j = np.arange(m)
    return 1.0 - np.abs(2.0 * (j + 0.5) / m - 1.0)


def _measure(profile: ClassProfile, name: str, offsets) -> tuple[MeasureDist, float]:
    return profile.measures[name], 1.0 + float(offsets.get(name, 0.0))


def gen_recording(profile: ClassProfile, duration_s: float, rate_hz: float, seed: int,
                  subject_id: str = "S0", trial_id: str = "T0",
                  offsets: Mapping[str, float] | None = None,
                  invalid_fraction: float = 0.0) -> tuple[Recording, GroundTruth]:
    """Piecewise gaze trace alternating dwells (fixation or pursuit) and saccades.

    Dwells drift linearly, so a dwell's dispersion is half its path length.
    Saccades follow a symmetric triangular speed profile that starts above
    the profile's velocity threshold. ``offsets`` scales measure means by
    ``1 + offset`` (per-subject idiosyncrasy). With ``invalid_fraction`` > 0,
    blink-like runs of (0, 0) samples are planted; event ground truth then
    describes the trace before blinks were applied.
    """
    if not duration_s > 0 or not rate_hz > 0:
        raise ValueError("duration and rate must be positive")
    rng = np.random.default_rng(seed)
    offsets = dict(offsets or {})
    n = int(math.floor(duration_s * rate_hz)) + 1
    dt = 1.0 / rate_hz
    ppd = profile.px_per_degree
    thr = profile.velocity_threshold_dps
    pthr = profile.pursuit_threshold_px
    t_us = _timestamps(n, rate_hz)
    pos = np.empty((n, 2))
    p = np.array(CENTER) + rng.normal(0, 50, 2)
    planted: list[PlantedEvent] = []
    i = 0
    pos[0] = p
    with_saccades = profile.saccade_rate_scale > 0

    def dwell_plan():
        if rng.random() < profile.pursuit_fraction:
            d, sc = _measure(profile, "pursuit_dispersion_px", offsets)
            disp = float(draw_measure(d, rng, lo=PURSUIT_DISPERSION_FACTOR * pthr, scale=sc))
            d, sc = _measure(profile, "pursuit_duration_ms", offsets)
            dur = float(draw_measure(d, rng, scale=sc)) / 1000.0
            dur = max(dur, 2 * disp / (PURSUIT_SPEED_FACTOR * thr * ppd))
            return "SmoothPursuit", disp, dur
        d, sc = _measure(profile, "fixation_dispersion_px", offsets)
        disp = float(draw_measure(d, rng, hi=FIXATION_DISPERSION_FACTOR * pthr, scale=sc))
        d, sc = _measure(profile, "fixation_duration_ms", offsets)
        dur = float(draw_measure(d, rng, scale=sc)) / 1000.0
        return "Fixation", disp, dur

    def saccade_plan():
        d, sc = _measure(profile, "saccade_duration_ms", offsets)
        dur = float(draw_measure(d, rng, scale=sc)) / 1000.0
        d, sc = _measure(profile, "saccade_mean_velocity_dps", offsets)
        vbar = float(draw_measure(d, rng, lo=MIN_MEAN_FACTOR * thr, hi=MAX_MEAN_VELOCITY, scale=sc))
        return max(2, int(round(dur * rate_hz))), vbar

    min_dwell = max(3, int(math.ceil(0.1 * rate_hz)))
    while True:
        kind, disp, dur = dwell_plan()
        m = max(min_dwell, int(round(dur * rate_hz)) + 1)
        m_sacc, vbar = saccade_plan() if with_saccades else (0, 0.0)
        remaining = n - i
        if not with_saccades or remaining - m < m_sacc + min_dwell:
            m = remaining
            last = True
        else:
            last = False
        # keep dwell drift below the velocity threshold, even when truncated
        max_len = PURSUIT_SPEED_FACTOR * thr * ppd * (m - 1) * dt
        if 2 * disp > max_len:
            disp = max_len / 2
            if kind == "SmoothPursuit" and disp <= PURSUIT_DISPERSION_FACTOR * pthr:
                kind = "Fixation"
                disp = min(disp, FIXATION_DISPERSION_FACTOR * pthr)
        u = _unit(rng, p)
        frac = np.arange(m) / max(m - 1, 1)
        pos[i:i + m] = p + np.outer(frac * 2 * disp, u)
        planted.append(PlantedEvent(kind, i, i + m - 1, int(t_us[i]), int(t_us[i + m - 1])))
        i += m - 1
        p = pos[i].copy()
        if last:
            break
        w = _triangle_weights(m_sacc)
        v0 = ONSET_FACTOR * thr
        peak = v0 + (vbar - v0) / w.mean()
        speeds = v0 + (peak - v0) * w
        u = _unit(rng, p)
        steps = np.cumsum(speeds * dt * ppd)
        pos[i + 1:i + 1 + m_sacc] = p + np.outer(steps, u)
        planted.append(PlantedEvent("Saccade", i, i + m_sacc, int(t_us[i]), int(t_us[i + m_sacc])))
        i += m_sacc
        p = pos[i].copy()

    data = np.full((n, len(SAMPLE_FIELDS)), np.nan)
    data[:, :2] = pos
    data[:, 2] = profile.pupil_baseline_mm + rng.normal(0, profile.pupil_noise_mm, n)
    data[:, 3] = profile.pupil_baseline_mm + rng.normal(0, profile.pupil_noise_mm, n)
    data[:, 4:7] = rng.normal(0, 5.0, (n, 3))
    data[:, 7:10] = rng.normal(0, 0.3, (n, 3)) + np.array([0.0, 9.81, 0.0])
    valid = np.ones(n, dtype=bool)
    if invalid_fraction > 0:
        _plant_blinks(data, valid, int(round(invalid_fraction * n)), rng)
    rec = Recording(subject_id, trial_id, rate_hz, ppd, t_us, data, valid, profile.class_label)
    truth = GroundTruth(planted, profile.class_label, subject_offsets=offsets, profile=profile.name)
    return rec, truth


def _plant_blinks(data: np.ndarray, valid: np.ndarray, count: int, rng) -> None:
    """Mark exactly ``count`` samples invalid in short runs, gaze set to (0, 0)."""
    n = valid.size
    count = min(count, n)
    while count > int((~valid).sum()):
        need = count - int((~valid).sum())
        length = int(min(need, rng.integers(3, 25)))
        start = int(rng.integers(0, n))
        idx = np.arange(start, min(start + length, n))
        idx = idx[valid[idx]][:need]
        valid[idx] = False
    data[~valid, 0:2] = 0.0
    data[~valid, 2:4] = np.nan


def trial_features(rec: Recording, profile: ClassProfile, feature_profile: str = SOCCER46):
    """The standard pipeline: detect, clean, split pursuits, extract."""
    events = detect_events(rec, profile.velocity_threshold_dps)
    report = clean_saccades(events, rec)
    events = split_smooth_pursuits(report.kept, profile.pursuit_threshold_px)
    return extract_trial_features(events, rec, feature_profile)


@dataclass
class ClassedTruth:
    subject_class: dict[str, str]
    subject_offsets: dict[str, object]
    subject_offset_sigma: float
    bayes_accuracy: float | None = None


def _count_map(n, classes) -> dict[str, int]:
    return {c: int(n[c] if isinstance(n, Mapping) else n) for c in classes}


def gen_trace_dataset(profiles: Mapping[str, ClassProfile], n_subjects, n_trials: int,
                      seed: int, duration_s: float = 10.0, rate_hz: float = 250.0,
                      feature_profile: str = SOCCER46, subject_offset_sigma: float | None = None,
                      domain_tag: str = "soccer") -> tuple[Dataset, ClassedTruth]:
    """Trial features computed from generated traces through the full pipeline.

    Each subject gets one relative offset per measure, drawn from
    N(0, sigma^2) with sigma from the profile unless overridden.
    """
    rng = np.random.default_rng(seed)
    classes = canonical_order(list(profiles))
    counts = _count_map(n_subjects, classes)
    rows, subj_class, subj_off = [], {}, {}
    for c in classes:
        prof = profiles[c]
        sigma = prof.subject_offset_sigma if subject_offset_sigma is None else subject_offset_sigma
        for s in range(counts[c]):
            sid = f"{c[:3].upper()}{s:02d}"
            off = {m: float(np.clip(rng.normal(0, sigma), -0.6, 0.6)) for m in prof.measures} \
                if sigma > 0 else {}
            subj_class[sid], subj_off[sid] = c, off
            for t in range(n_trials):
                rec, _ = gen_recording(prof, duration_s, rate_hz, int(rng.integers(2**63 - 1)),
                                       sid, f"{sid}-T{t:02d}", off)
                rows.append(trial_features(rec, prof, feature_profile))
    ds = Dataset.from_features(rows, domain_tag)
    return ds, ClassedTruth(subj_class, subj_off, float(subject_offset_sigma or 0.0))


# ---------------------------------------------------------------- feature space

@dataclass(frozen=True)
class FeatureClassProfile:
    """Independent Gaussian per feature for one class."""

    class_label: str
    means: dict[str, float]
    stds: dict[str, float]

    def __post_init__(self):
        if set(self.means) != set(self.stds):
            raise ValueError("means and stds must name the same features")
        if any(s <= 0 for s in self.stds.values()):
            raise ValueError("stds must be positive")


def blob_profiles(n_classes: int = 3, n_dims: int = 2, separation: float = 2.0,
                  classes: Sequence[str] | None = None) -> dict[str, FeatureClassProfile]:
    """Unit-variance classes with means on a regular simplex of edge ``separation``."""
    from ..labels import EXPERTISE_CLASSES
    classes = list(classes or (EXPERTISE_CLASSES if n_classes == 3 else
                               [f"C{k}" for k in range(n_classes)]))
    if n_dims < n_classes - 1:
        raise ValueError("need at least n_classes - 1 dims")
    E = np.eye(n_classes) - 1.0 / n_classes
    # orthonormal basis of the simplex plane
    Q, _ = np.linalg.qr(E.T)
    verts = E @ Q[:, :n_classes - 1]
    verts *= separation / np.linalg.norm(verts[0] - verts[1])
    names = [f"f{j}" for j in range(n_dims)]
    out = {}
    for k, c in enumerate(classes):
        mu = np.zeros(n_dims)
        mu[:n_classes - 1] = verts[k]
        out[c] = FeatureClassProfile(c, dict(zip(names, mu.tolist())), {n: 1.0 for n in names})
    return out


def gen_classed_dataset(profiles: Mapping[str, FeatureClassProfile], n_subjects, n_trials: int,
                        seed: int, subject_offset_sigma: float = 0.0, domain_tag: str = "synthetic",
                        bayes_samples: int = 200_000) -> tuple[Dataset, ClassedTruth]:
    """Feature-space trials: ``mean + std * (subject_offset + noise)`` per feature.

    Subject offsets are N(0, subject_offset_sigma^2) per feature in units of
    the feature's std, drawn once per subject. The reported Bayes accuracy is
    for a trial of an unseen subject with equal class priors.
    """
    rng = np.random.default_rng(seed)
    classes = canonical_order(list(profiles))
    names = list(next(iter(profiles.values())).means)
    counts = _count_map(n_subjects, classes)
    X, y, subs, trials = [], [], [], []
    subj_class, subj_off = {}, {}
    for c in classes:
        mu = np.array([profiles[c].means[n] for n in names])
        sd = np.array([profiles[c].stds[n] for n in names])
        for s in range(counts[c]):
            sid = f"{c[:3].upper()}{s:03d}"
            off = rng.normal(0, subject_offset_sigma, len(names)) if subject_offset_sigma > 0 \
                else np.zeros(len(names))
            subj_class[sid], subj_off[sid] = c, off.tolist()
            noise = rng.normal(size=(n_trials, len(names)))
            X.append(mu + sd * (off + noise))
            y += [c] * n_trials
            subs += [sid] * n_trials
            trials += [f"{sid}-T{t:03d}" for t in range(n_trials)]
    ds = Dataset(np.vstack(X), y, subs, trials, tuple(names), domain_tag)
    bayes = bayes_accuracy(profiles, subject_offset_sigma, bayes_samples, seed + 1)
    return ds, ClassedTruth(subj_class, subj_off, subject_offset_sigma, bayes)


def bayes_accuracy(profiles: Mapping[str, FeatureClassProfile], subject_offset_sigma: float = 0.0,
                   n_samples: int = 200_000, seed: int = 0) -> float:
    """Accuracy of the optimal classifier under the generator's densities.

    Exact for two classes sharing per-feature stds; Monte Carlo otherwise.
    """
    classes = canonical_order(list(profiles))
    names = list(profiles[classes[0]].means)
    inflate = math.sqrt(1.0 + subject_offset_sigma ** 2)
    M = np.array([[profiles[c].means[n] for n in names] for c in classes])
    S = np.array([[profiles[c].stds[n] for n in names] for c in classes]) * inflate
    if len(classes) == 2 and np.allclose(S[0], S[1]):
        d = np.linalg.norm((M[0] - M[1]) / S[0])
        return float(stats.norm.cdf(d / 2))
    rng = np.random.default_rng(seed)
    k = rng.integers(0, len(classes), n_samples)
    Z = M[k] + S[k] * rng.normal(size=(n_samples, len(names)))
    ll = np.stack([-0.5 * (((Z - M[j]) / S[j]) ** 2).sum(axis=1) - np.log(S[j]).sum()
                   for j in range(len(classes))], axis=1)
    return float(np.mean(np.argmax(ll, axis=1) == k))


def significance_profiles() -> dict[str, FeatureClassProfile]:
    """Classes centred on the bundled significance-fixture medians."""
    d = load_profile_data("soccer_significance")
    cv = d["within_class_cv"]
    out = {}
    for c in d["classes"]:
        means = {f: float(v[c]) for f, v in d["features"].items()}
        out[c] = FeatureClassProfile(c, means, {f: abs(m) * cv for f, m in means.items()})
    return out


def surgeon_feature_profiles(cv: float | None = None) -> dict[str, FeatureClassProfile]:
    d = load_profile_data("surgeon_evolution")
    cv = d["within_class_cv"] if cv is None else cv
    out = {}
    for c in ("Novice", "Intermediate", "Expert"):
        means = {f: float(v[c]) for f, v in d["features"].items()}
        out[c] = FeatureClassProfile(c, means, {f: abs(m) * cv for f, m in means.items()})
    return out


def gen_gain_ratio_dataset(n_per_class: int = 100, seed: int = 0) -> Dataset:
    """Scaled-beta draws matching each class's (min, max, mean) per feature."""
    d = load_profile_data("surgeon_gain_ratio")
    conc = d["concentration"]
    rng = np.random.default_rng(seed)
    names = list(d["features"])
    blocks, y, subs = [], [], []
    for c in ("Novice", "Expert"):
        cols = []
        for f in names:
            lo, hi, mean = d["features"][f][c]
            m = (mean - lo) / (hi - lo)
            cols.append(lo + (hi - lo) * rng.beta(m * conc, (1 - m) * conc, n_per_class))
        blocks.append(np.column_stack(cols))
        y += [c] * n_per_class
        subs += [f"{c[:3].upper()}{i:03d}" for i in range(n_per_class)]
    return Dataset(np.vstack(blocks), y, subs, subs, tuple(names), "surgery")


# ---------------------------------------------------------------- tracking fixture

STUDY_LOST_TRIALS = {1: 11, 8: 11, 18: 35, 33: 1}


def gen_tracking_fixture(seed: int = 0, n_subjects: int = 33, trials_per_subject: int = 52,
                         lost: Mapping[int, int] = STUDY_LOST_TRIALS, duration_s: float = 0.5,
                         rate_hz: float = 250.0, profile: ClassProfile | None = None
                         ) -> tuple[list[Recording], set[str]]:
    """Trials with planted invalid-sample rates; returns (recordings, ids planted to fail).

    Planted trials get a tracking ratio in [0.40, 0.70]; all others in
    [0.80, 1.00].
    """
    from .catalog import load_class_profile
    profile = profile or load_class_profile("soccer_novice")
    rng = np.random.default_rng(seed)
    recs, bad_ids = [], set()
    for s in range(1, n_subjects + 1):
        sid = f"P{s:02d}"
        bad = set(rng.choice(trials_per_subject, size=lost.get(s, 0), replace=False).tolist())
        for t in range(trials_per_subject):
            tid = f"{sid}-T{t:02d}"
            frac = rng.uniform(0.30, 0.60) if t in bad else rng.uniform(0.0, 0.20)
            rec, _ = gen_recording(profile, duration_s, rate_hz, int(rng.integers(2**63 - 1)),
                                   sid, tid, invalid_fraction=frac)
            recs.append(rec)
            if t in bad:
                bad_ids.add(tid)
    return recs, bad_ids


# ---------------------------------------------------------------- confusion corpus

ONLINE_DIM_ORDER = ("por_x", "por_y", "pupil_diam", "gyro_x", "gyro_y", "gyro_z",
                    "accel_x", "accel_y", "accel_z")


@dataclass(frozen=True)
class ConfusionProfile:
    dims: dict[str, tuple[float, float]]
    rate_hz: float = 100.0
    duration_s: float = 120.0
    half_window_ms: float = 1000.0
    confusion_dilation: float = 0.0102
    subject_offset_sigma: float = 0.25
    name: str = "confusion_base"

    @classmethod
    def load(cls, name_or_path="confusion_base") -> "ConfusionProfile":
        d = load_profile_data(name_or_path)
        return cls({k: tuple(v) for k, v in d["dims"].items()}, d["rate_hz"], d["duration_s"],
                   d["half_window_ms"], d["confusion_dilation"], d["subject_offset_sigma"],
                   d["name"])


@dataclass
class ConfusionCorpus:
    items: list[tuple[Recording, list[int]]]
    truths: list[GroundTruth]
    shift_sigma: dict[str, float]
    dilation: float

    @property
    def n_events(self) -> int:
        return sum(len(t) for _, t in self.items)


def _event_times(rng, k: int, duration_us: int, half_us: int) -> list[int]:
    """Sorted event centres with a clean margin before each window."""
    margin = 4 * half_us
    slot = (duration_us - margin) // max(k, 1)
    if k and slot < 2 * margin:
        raise ValueError("recording too short for the requested number of events")
    times = []
    for j in range(k):
        lo = margin + j * slot + margin // 2
        hi = margin + (j + 1) * slot - margin // 2
        times.append(int(rng.integers(lo, max(hi, lo + 1))))
    return times


def gen_confusion_corpus(base: ConfusionProfile | None = None, shift_sigma=2.0,
                         events_per_subject=1, n_subjects: int = 15, seed: int = 0,
                         dilation: float = 0.0, duration_s: float | None = None,
                         rate_hz: float | None = None,
                         subject_offset_sigma: float | None = None) -> ConfusionCorpus:
    """Recordings with planted confusion windows.

    Inside each window (inclusive, +-half_window) every online dim's mean
    moves by ``shift_sigma`` of its std, and pupils additionally dilate by
    the fraction ``dilation``. Samples are i.i.d. Gaussian around per-subject
    offset baselines.
    """
    base = base or ConfusionProfile.load()
    shift = {d: float(shift_sigma[d] if isinstance(shift_sigma, Mapping) else shift_sigma)
             for d in ONLINE_DIM_ORDER}
    if any(v < 0 for v in shift.values()):
        raise ValueError("shift must be >= 0")
    rate = rate_hz or base.rate_hz
    dur = duration_s or base.duration_s
    off_sigma = base.subject_offset_sigma if subject_offset_sigma is None else subject_offset_sigma
    per = list(events_per_subject) if isinstance(events_per_subject, Sequence) \
        else [int(events_per_subject)] * n_subjects
    rng = np.random.default_rng(seed)
    n = int(math.floor(dur * rate)) + 1
    t_us = _timestamps(n, rate)
    half_us = int(round(base.half_window_ms * 1000))
    mu = np.array([base.dims[d][0] for d in ONLINE_DIM_ORDER])
    sd = np.array([base.dims[d][1] for d in ONLINE_DIM_ORDER])
    sh = np.array([shift[d] for d in ONLINE_DIM_ORDER])
    items, truths = [], []
    for s, k in enumerate(per):
        sid = f"N{s:02d}"
        off = rng.normal(0, off_sigma, len(mu)) if off_sigma > 0 else np.zeros(len(mu))
        times = _event_times(rng, k, int(t_us[-1]), half_us)
        inside = np.zeros(n, dtype=bool)
        for c in times:
            inside |= np.abs(t_us - c) <= half_us
        m = mu + sd * off
        online = m + sd * rng.normal(size=(n, len(mu)))
        online[inside] += sd * sh
        data = np.empty((n, len(SAMPLE_FIELDS)))
        data[:, 0:2] = online[:, 0:2]
        pupil = m[2] + sd[2] * rng.normal(size=(n, 2))
        pupil[inside] += sd[2] * sh[2]
        pupil[inside] *= 1.0 + dilation
        data[:, 2:4] = pupil
        data[:, 4:10] = online[:, 3:9]
        rec = Recording(sid, f"{sid}-R0", rate, 40.0, t_us, data, np.ones(n, dtype=bool), None)
        items.append((rec, times))
        truths.append(GroundTruth([], None, times, {"online": off.tolist()}, base.name))
    return ConfusionCorpus(items, truths, shift, dilation)


# ---------------------------------------------------------------- motion and AOI

def gen_head_motion(ranges: Mapping[str, float], duration_s: float = 10.0, rate_hz: float = 100.0,
                    seed: int = 0, subject_id: str = "M0") -> Recording:
    """Triangle-wave head motion whose per-axis max-min equals ``ranges``."""
    rng = np.random.default_rng(seed)
    n = int(math.floor(duration_s * rate_hz)) + 1
    t_us = _timestamps(n, rate_hz)
    data = np.full((n, len(SAMPLE_FIELDS)), np.nan)
    data[:, 0] = CENTER[0]
    data[:, 1] = CENTER[1]
    phase = np.arange(n) / (n - 1)
    for j, axis in enumerate(("gyro_x", "gyro_y", "gyro_z", "accel_x", "accel_y", "accel_z")):
        r = float(ranges.get(axis, 0.0))
        periods = int(rng.integers(1, 4))
        tri = 1.0 - np.abs(((phase * periods * 2) % 2) - 1.0)
        tri[0], tri[-1] = 0.0, 1.0
        data[:, 4 + j] = rng.uniform(-5, 5) + r * tri
    return Recording(subject_id, f"{subject_id}-motion", rate_hz, 40.0, t_us, data,
                     np.ones(n, dtype=bool))


def gen_aoi_segment(approach_counts: Mapping[str, int], zeroing_counts: Mapping[str, int],
                    segment_s: float = 30.0, phase_split: float = 0.8, seed: int = 0):
    """Fixations tagged with AOI labels in a navigation segment.

    Fixations are spread evenly inside each phase (never straddling the
    split) in shuffled AOI order. Returns (tagged events, start_us, end_us).
    """
    from ..events import EventKind, GazeEvent
    rng = np.random.default_rng(seed)
    end_us = int(segment_s * 1e6)
    split_us = int(end_us * phase_split)
    tagged = []
    for counts, lo, hi in ((approach_counts, 0, split_us), (zeroing_counts, split_us, end_us)):
        labels = [a for a, k in counts.items() for _ in range(int(k))]
        rng.shuffle(labels)
        if not labels:
            continue
        slot = (hi - lo) / len(labels)
        for j, aoi in enumerate(labels):
            s = int(lo + j * slot + 0.1 * slot)
            e = int(lo + (j + 1) * slot - 0.1 * slot)
            tagged.append((GazeEvent(EventKind.FIXATION, s, e, 0, 0, centroid_x=CENTER[0],
                                     centroid_y=CENTER[1], dispersion_px=10.0), aoi))
    return tagged, 0, end_us


__all__ = [
    "ClassedTruth", "ConfusionCorpus", "ConfusionProfile", "FeatureClassProfile", "GroundTruth",
    "PlantedEvent", "bayes_accuracy", "blob_profiles", "draw_measure", "gen_aoi_segment",
    "gen_classed_dataset", "gen_confusion_corpus", "gen_gain_ratio_dataset", "gen_head_motion",
    "gen_recording", "gen_tracking_fixture", "gen_trace_dataset", "significance_profiles",
    "surgeon_feature_profiles", "trial_features",
]
