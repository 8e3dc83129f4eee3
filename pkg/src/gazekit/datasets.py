"""Labeled datasets and the splitting, relabeling and resampling protocols.

Every randomized routine takes an explicit ``seed`` and builds its own
``numpy.random.Generator``; nothing reads ambient random state.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    ClassMissing,
    InsufficientSubjects,
    NoConfusionSamples,
    TimeOutOfRange,
    TooFewRows,
)
from .features import ONLINE_FIELDS, TrialFeatures, online_matrix
from .ingest import Recording
from .labels import CONFUSION_EVENT, NO_EVENT, canonical_order

MANIFEST_VERSION = 1


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix plus per-row class, subject and trial labels.

    ``missing`` is True where a value is undefined; such cells hold NaN in
    ``X`` and must be excluded, never zero-filled, by consumers.
    """

    X: np.ndarray
    y: np.ndarray
    subjects: np.ndarray
    trials: np.ndarray
    feature_names: tuple[str, ...]
    domain_tag: str = ""
    missing: np.ndarray = field(default=None)

    def __post_init__(self):
        X = np.array(self.X, dtype=float, ndmin=2)
        n = len(self.y)
        if n == 0:
            X = X.reshape(0, len(self.feature_names))
        if X.shape != (n, len(self.feature_names)):
            raise ValueError(f"X shape {X.shape} does not match {n} rows x "
                             f"{len(self.feature_names)} features")
        for name in ("y", "subjects", "trials"):
            arr = np.asarray(getattr(self, name), dtype=object)
            if arr.shape != (n,):
                raise ValueError(f"{name} must have one entry per row")
            object.__setattr__(self, name, arr)
        if any(s is None or s == "" for s in self.subjects):
            raise ValueError("every row needs a subject_id")
        missing = ~np.isfinite(X) if self.missing is None else \
            np.asarray(self.missing, dtype=bool) | ~np.isfinite(X)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "missing", missing)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    def __len__(self):
        return len(self.y)

    @classmethod
    def from_features(cls, rows: Sequence[TrialFeatures], domain_tag: str = "") -> "Dataset":
        if not rows:
            raise TooFewRows("no feature rows")
        names = rows[0].names
        if any(r.names != names for r in rows):
            raise ValueError("rows mix feature schemas")
        return cls(
            X=np.vstack([r.values for r in rows]),
            y=[r.class_label for r in rows],
            subjects=[r.subject_id for r in rows],
            trials=[r.trial_id for r in rows],
            feature_names=names,
            domain_tag=domain_tag,
            missing=np.vstack([r.missing for r in rows]),
        )

    @property
    def classes(self) -> list[str]:
        return canonical_order(self.y)

    def subject_labels(self) -> dict[str, str]:
        """Map each subject to its single class label."""
        out = {}
        for s, c in zip(self.subjects, self.y):
            if out.setdefault(s, c) != c:
                raise ValueError(f"subject {s!r} carries several labels")
        return out

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.X[idx], self.y[idx], self.subjects[idx], self.trials[idx],
                       self.feature_names, self.domain_tag, self.missing[idx])

    def select(self, names: Sequence[str]) -> "Dataset":
        cols = [self.feature_names.index(n) for n in names]
        return Dataset(self.X[:, cols], self.y, self.subjects, self.trials, tuple(names),
                       self.domain_tag, self.missing[:, cols])

    def with_labels(self, y) -> "Dataset":
        return Dataset(self.X, y, self.subjects, self.trials, self.feature_names,
                       self.domain_tag, self.missing)

    def with_values(self, X, missing=None) -> "Dataset":
        return Dataset(X, self.y, self.subjects, self.trials, self.feature_names,
                       self.domain_tag, self.missing if missing is None else missing)

    def complete_columns(self) -> list[str]:
        """Feature names with no missing value in any row."""
        return [n for n, m in zip(self.feature_names, self.missing.any(axis=0)) if not m]


def concat(datasets: Sequence[Dataset]) -> Dataset:
    first = datasets[0]
    if any(d.feature_names != first.feature_names for d in datasets):
        raise ValueError("datasets differ in schema")
    return Dataset(
        np.vstack([d.X for d in datasets]),
        np.concatenate([d.y for d in datasets]),
        np.concatenate([d.subjects for d in datasets]),
        np.concatenate([d.trials for d in datasets]),
        first.feature_names,
        first.domain_tag,
        np.vstack([d.missing for d in datasets]),
    )


@dataclass(frozen=True, eq=False)
class Split:
    train: np.ndarray
    test: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "train", np.sort(np.asarray(self.train, dtype=np.int64)))
        object.__setattr__(self, "test", np.sort(np.asarray(self.test, dtype=np.int64)))
        if np.intersect1d(self.train, self.test).size:
            raise ValueError("train and test overlap")

    def to_json(self) -> dict:
        return {"seed": self.seed, "train": self.train.tolist(), "test": self.test.tolist()}

    @classmethod
    def from_json(cls, obj: Mapping) -> "Split":
        return cls(obj["train"], obj["test"], obj.get("seed"))


def _subjects_by_class(ds: Dataset) -> dict[str, list[str]]:
    by_class: dict[str, list[str]] = {c: [] for c in ds.classes}
    for s, c in sorted(ds.subject_labels().items()):
        by_class[c].append(s)
    return by_class


def _rows_of(ds: Dataset, subjects) -> np.ndarray:
    return np.flatnonzero(np.isin(ds.subjects, list(subjects)))


def _per_class_counts(spec, by_class) -> dict[str, int]:
    if spec is None:
        return {}
    if isinstance(spec, Mapping):
        return {c: int(spec.get(c, 0)) for c in by_class}
    if isinstance(spec, (int, np.integer)):
        return {c: int(spec) for c in by_class}
    frac = float(spec)
    if not 0.0 <= frac <= 1.0:
        raise ValueError("fraction must lie in [0, 1]")
    return {c: int(round(frac * len(s))) for c, s in by_class.items()}


def participant_split(ds: Dataset, test_subjects_per_class, seed: int,
                      train_subjects_per_class=None) -> Split:
    """Assign whole subjects to train or test.

    ``test_subjects_per_class`` is a per-class count mapping, one count for
    every class, or a fraction of each class's subjects. With
    ``train_subjects_per_class`` only that many of the remaining subjects are
    used for training; otherwise all of them are.
    """
    rng = np.random.default_rng(seed)
    by_class = _subjects_by_class(ds)
    n_test = _per_class_counts(test_subjects_per_class, by_class)
    n_train = _per_class_counts(train_subjects_per_class, by_class)
    train_s, test_s = [], []
    for c, subs in by_class.items():
        t = n_test.get(c, 0)
        if t and t >= len(subs):
            raise InsufficientSubjects(f"class {c} has {len(subs)} subjects, {t} requested for test")
        r = n_train.get(c, len(subs) - t)
        if t + r > len(subs):
            raise InsufficientSubjects(f"class {c} has {len(subs)} subjects, {t}+{r} requested")
        order = rng.permutation(len(subs))
        test_s += [subs[i] for i in order[:t]]
        train_s += [subs[i] for i in order[t:t + r]]
    return Split(_rows_of(ds, train_s), _rows_of(ds, test_s), seed)


def leave_one_subject_out(ds: Dataset) -> list[Split]:
    """One split per subject, that subject forming the whole test set."""
    out = []
    for s in sorted(set(ds.subjects)):
        test = ds.subjects == s
        out.append(Split(np.flatnonzero(~test), np.flatnonzero(test), None))
    return out


def random_split(ds: Dataset, fraction: float, seed: int) -> Split:
    """Row-level split that ignores subject identity."""
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(ds))
    k = int(round(fraction * len(ds)))
    return Split(order[k:], order[:k], seed)


def flip_labels(ds: Dataset, class_a: str, class_b: str, fraction: float = 0.5,
                seed: int = 0) -> Dataset:
    """Swap the labels of a fraction of whole subjects between two classes."""
    by_class = _subjects_by_class(ds)
    for c in (class_a, class_b):
        if c not in by_class:
            raise ClassMissing(f"class {c!r} not present")
    rng = np.random.default_rng(seed)
    y = ds.y.copy()
    for src, dst in ((class_a, class_b), (class_b, class_a)):
        subs = by_class[src]
        k = int(round(fraction * len(subs)))
        chosen = [subs[i] for i in rng.permutation(len(subs))[:k]]
        y[np.isin(ds.subjects, chosen)] = dst
    return ds.with_labels(y)


def smote(rows, k: int, target_count: int, seed: int, standardize: bool = True,
          return_provenance: bool = False):
    """Synthetic minority oversampling for one class.

    Each synthetic row is ``x + u * (nn - x)`` with ``x`` drawn uniformly from
    the real rows, ``nn`` one of its ``k`` nearest real neighbours and ``u``
    uniform on [0, 1]. Neighbour distances use z-scored columns when
    ``standardize`` is set. Returns ``target_count - len(rows)`` rows, and with
    ``return_provenance`` also the (base index, neighbour index, u) arrays.
    """
    X = np.asarray(rows, dtype=float)
    n = X.shape[0]
    if n < k + 1:
        raise TooFewRows(f"SMOTE with k={k} needs at least {k + 1} rows, got {n}")
    if target_count < n:
        raise ValueError("target_count is below the current row count")
    m = target_count - n
    rng = np.random.default_rng(seed)
    Z = X
    if standardize:
        sd = X.std(axis=0)
        Z = (X - X.mean(axis=0)) / np.where(sd > 0, sd, 1.0)
    d2 = ((Z[:, None, :] - Z[None, :, :]) ** 2).sum(axis=-1)
    np.fill_diagonal(d2, np.inf)
    neighbours = np.argsort(d2, axis=1, kind="stable")[:, :k]
    base = rng.integers(0, n, size=m)
    nn = neighbours[base, rng.integers(0, k, size=m)]
    u = rng.random(m)
    out = X[base] + u[:, None] * (X[nn] - X[base])
    if return_provenance:
        return out, base, nn, u
    return out


def oversample(ds: Dataset, target_count: int, k: int = 5, seed: int = 0) -> Dataset:
    """SMOTE every class of ``ds`` up to ``target_count`` rows.

    Synthetic rows inherit the subject of their base row, so participant-wise
    splitting keeps them with their origin.
    """
    parts = [ds]
    for i, c in enumerate(ds.classes):
        idx = np.flatnonzero(ds.y == c)
        if len(idx) >= target_count:
            continue
        cols = ds.complete_columns()
        col_idx = [ds.feature_names.index(n) for n in cols]
        synth, base, _, _ = smote(ds.X[idx][:, col_idx], k, target_count, seed + i,
                                  return_provenance=True)
        X = np.full((len(synth), len(ds.feature_names)), np.nan)
        X[:, col_idx] = synth
        parts.append(Dataset(
            X, [c] * len(synth), ds.subjects[idx][base],
            [f"smote-{c}-{j}" for j in range(len(synth))],
            ds.feature_names, ds.domain_tag,
        ))
    return concat(parts)


@dataclass(frozen=True)
class NormalizationTable:
    mean: np.ndarray
    std: np.ndarray
    zero_variance: np.ndarray


def zscore_per_dataset(datasets: Sequence[Dataset]) -> tuple[list[Dataset], list[NormalizationTable]]:
    """Standardize each dataset with its own column means and population stds.

    Zero-variance columns are centred but not divided and are reported in
    the table's ``zero_variance`` mask (and marked missing in the output).
    """
    out, tables = [], []
    for ds in datasets:
        if len(ds) < 2:
            raise TooFewRows("z-normalization needs at least 2 rows")
        X = np.where(ds.missing, np.nan, ds.X)
        with np.errstate(invalid="ignore"):
            mean = np.nanmean(X, axis=0) if np.isfinite(X).any() else np.full(X.shape[1], np.nan)
            std = np.nanstd(X, axis=0)
        zero = ~(std > 0)
        Z = (X - mean) / np.where(zero, 1.0, std)
        missing = ds.missing | zero[None, :]
        out.append(ds.with_values(Z, missing))
        tables.append(NormalizationTable(mean, std, zero))
    return out, tables


def label_confusion_windows(rec: Recording, confusion_times_us: Sequence[int],
                            half_window_ms: float = 1000.0) -> np.ndarray:
    """Per-sample labels: ConfusionEvent within +/- half window (inclusive) of any event."""
    t = rec.t_us
    labels = np.full(len(rec), NO_EVENT, dtype=object)
    half = half_window_ms * 1000.0
    inside = np.zeros(len(rec), dtype=bool)
    for ct in confusion_times_us:
        if len(rec) == 0 or not t[0] <= ct <= t[-1]:
            raise TimeOutOfRange(f"confusion time {ct} outside the recording")
        inside |= np.abs(t - ct) <= half
    labels[inside] = CONFUSION_EVENT
    return labels


@dataclass(frozen=True)
class EventSets:
    train: Dataset
    test: Dataset
    train_subjects: tuple[str, ...]
    test_subjects: tuple[str, ...]


def _subject_rows(rec_labels):
    """Stack usable samples of one subject's recordings: (X, labels, trial ids)."""
    X, y, t = [], [], []
    for rec, labels in rec_labels:
        M = online_matrix(rec)
        ok = np.flatnonzero(rec.valid & np.isfinite(M).all(axis=1))
        X.append(M[ok])
        y.append(labels[ok])
        t += [f"{rec.trial_id}@{j}" for j in ok.tolist()]
    return np.vstack(X), np.concatenate(y), np.array(t, dtype=object)


def _balanced_rows(rec_labels, rng):
    X, y, t = _subject_rows(rec_labels)
    conf = np.flatnonzero(y == CONFUSION_EVENT)
    calm = np.flatnonzero(y == NO_EVENT)
    k = min(len(conf), len(calm))
    if k < len(conf):
        conf = np.sort(rng.choice(conf, size=k, replace=False))
    calm = np.sort(rng.choice(calm, size=k, replace=False))
    idx = np.concatenate((conf, calm))
    return X[idx], y[idx], t[idx]


def balanced_event_training_set(recordings: Sequence[tuple[Recording, np.ndarray]],
                                train_fraction_subjects: float = 2 / 3, seed: int = 0,
                                balance_test: bool = True) -> EventSets:
    """Subject-wise, exactly balanced sample sets for confusion detection.

    ``recordings`` pairs each recording with its per-sample label vector.
    Training subjects are drawn at random; each contributes all usable
    confusion samples plus the same number of its own no-event samples.
    Held-out subjects are balanced the same way unless ``balance_test`` is
    False, in which case all their usable samples are kept.
    """
    by_subject: dict[str, list] = {}
    for rec, labels in recordings:
        by_subject.setdefault(rec.subject_id, []).append((rec, np.asarray(labels, dtype=object)))
    subjects = sorted(by_subject)
    if len(subjects) < 3:
        raise InsufficientSubjects("need at least 3 subjects")
    rng = np.random.default_rng(seed)
    n_train = int(round(len(subjects) * train_fraction_subjects))
    n_train = min(max(n_train, 1), len(subjects) - 1)
    order = rng.permutation(len(subjects))
    train_s = sorted(subjects[i] for i in order[:n_train])
    test_s = sorted(subjects[i] for i in order[n_train:])

    def build(subs, balanced):
        X, y, s, t = [], [], [], []
        for sub in subs:
            if balanced:
                xs, ys, ts = _balanced_rows(by_subject[sub], rng)
            else:
                xs, ys, ts = _subject_rows(by_subject[sub])
            X.append(xs)
            y.append(ys)
            t.append(ts)
            s += [sub] * len(ys)
        return Dataset(np.vstack(X), np.concatenate(y), s, np.concatenate(t),
                       ONLINE_FIELDS, "confusion")

    train = build(train_s, True)
    if not np.any(train.y == CONFUSION_EVENT):
        raise NoConfusionSamples("training subjects have no confusion samples")
    test = build(test_s, balance_test)
    return EventSets(train, test, tuple(train_s), tuple(test_s))


def dataset_to_csv(ds: Dataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("subject_id", "trial_id", "class_label") + ds.feature_names)
    for i in range(len(ds)):
        cells = ["" if m or not math.isfinite(v) else repr(float(v))
                 for v, m in zip(ds.X[i], ds.missing[i])]
        w.writerow([ds.subjects[i], ds.trials[i], ds.y[i] or ""] + cells)
    return buf.getvalue()


def dataset_manifest(ds: Dataset) -> dict:
    labels = ds.subject_labels() if len(ds) else {}
    return {
        "version": MANIFEST_VERSION,
        "domain_tag": ds.domain_tag,
        "schema": list(ds.feature_names),
        "label_map": {c: i for i, c in enumerate(ds.classes)},
        "subjects": [{"subject_id": s, "class_label": c} for s, c in sorted(labels.items())],
        "n_rows": len(ds),
    }


def save_dataset(ds: Dataset, csv_path, manifest_path=None) -> None:
    csv_path = Path(csv_path)
    manifest_path = Path(manifest_path or csv_path.with_suffix(".manifest.json"))
    csv_path.write_text(dataset_to_csv(ds), encoding="utf-8")
    manifest_path.write_text(json.dumps(dataset_manifest(ds), indent=2), encoding="utf-8")


def parse_dataset_csv(text: str, domain_tag: str = "") -> Dataset:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header[:3] != ["subject_id", "trial_id", "class_label"]:
        raise ValueError("feature CSV must start with subject_id,trial_id,class_label")
    names = tuple(header[3:])
    X, y, s, t = [], [], [], []
    for row in reader:
        if not row:
            continue
        s.append(row[0])
        t.append(row[1])
        y.append(row[2] or None)
        X.append([float(c) if c != "" else math.nan for c in row[3:]])
    X = np.array(X, dtype=float).reshape(len(y), len(names))
    return Dataset(X, y, s, t, names, domain_tag)


def load_dataset(csv_path, manifest_path=None) -> Dataset:
    csv_path = Path(csv_path)
    manifest_path = Path(manifest_path or csv_path.with_suffix(".manifest.json"))
    tag = ""
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        tag = manifest.get("domain_tag", "")
    return parse_dataset_csv(csv_path.read_text(encoding="utf-8"), tag)
