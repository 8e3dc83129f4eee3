"""Evaluation protocols: hold-out evaluation, k-fold CV, multi-run experiments."""

from __future__ import annotations

import math
import warnings
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..datasets import Dataset, concat, participant_split, random_split
from ..errors import ClassMissing, MissingSharedDim, TooManyFolds
from ..labels import canonical_order
from .metrics import EvalReport, pool_reports
from .models import BAGGED_TREES, Model, ModelSpec, train
from .selection import MODEL_FREQUENCY, FeatureRanking, rank_chi_square, rank_mrmr


def run_many(fn: Callable[[int], object], seeds: Sequence[int], workers: int | None = None) -> list:
    """Apply ``fn`` to every seed, in worker threads when ``workers`` > 1.

    Results come back in seed order whatever the completion order.
    """
    seeds = list(seeds)
    if not workers or workers <= 1 or len(seeds) <= 1:
        return [fn(s) for s in seeds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, seeds))


def evaluate(m: Model, ds: Dataset, meta: dict | None = None) -> EvalReport:
    """Score ``m`` on every row of ``ds`` (columns picked by the model's schema)."""
    if len(ds) == 0:
        raise ValueError("empty test set")
    missing = [n for n in m.feature_schema if n not in ds.feature_names]
    if missing:
        raise MissingSharedDim(f"test data lacks features {missing}")
    sub = ds.select(m.feature_schema)
    S = m.scores(sub.X)
    pred = np.asarray(m.classes, dtype=object)[np.argmax(S, axis=1)]
    classes = list(m.classes) + [c for c in canonical_order(ds.y) if c not in m.classes]
    if len(classes) > len(m.classes):
        S = np.hstack([S, np.full((len(ds), len(classes) - len(m.classes)), -np.inf)])
    return EvalReport.from_predictions(ds.y, pred, S, classes, meta)


@dataclass
class CVResult:
    pooled: EvalReport
    folds: list[EvalReport]
    participant_wise: bool
    k: int

    @property
    def mean_fold_accuracy(self) -> float:
        return float(np.mean([f.accuracy for f in self.folds]))

    def to_json(self) -> dict:
        return {"k": self.k, "participant_wise": self.participant_wise,
                "pooled": self.pooled.to_json(include_roc=False),
                "folds": [f.to_json(include_roc=False) for f in self.folds],
                "mean_fold_accuracy": self.mean_fold_accuracy}


def fold_assignment(ds: Dataset, k: int, participant_wise: bool, seed: int) -> np.ndarray:
    """Fold number per row, stratified by class.

    Units (whole subjects in participant-wise mode, rows otherwise) are dealt
    round-robin within each class, continuing across classes, so every fold
    holds a near-equal share of each class.
    """
    rng = np.random.default_rng(seed)
    if participant_wise:
        subjects = sorted(set(ds.subjects))
        if k > len(subjects):
            raise TooManyFolds(f"{k} folds requested but only {len(subjects)} subjects")
        first = {}
        for s, c in zip(ds.subjects, ds.y):
            first.setdefault(s, c)
        units = {c: [s for s in subjects if first[s] == c] for c in canonical_order(ds.y)}
    else:
        if k > len(ds):
            raise TooManyFolds(f"{k} folds requested but only {len(ds)} rows")
        units = {c: np.flatnonzero(ds.y == c).tolist() for c in canonical_order(ds.y)}
    fold_of = {}
    pos = 0
    for c, members in units.items():
        for j in rng.permutation(len(members)):
            fold_of[members[j]] = pos % k
            pos += 1
    if participant_wise:
        return np.array([fold_of[s] for s in ds.subjects], dtype=np.int64)
    return np.array([fold_of[i] for i in range(len(ds))], dtype=np.int64)


def kfold_cv(ds: Dataset, k: int = 10, participant_wise: bool = True,
             spec: ModelSpec = ModelSpec(), seed: int = 0, features=None) -> CVResult:
    """k-fold cross-validation with per-fold and pooled reports.

    Row-wise folding lets one subject's trials land on both sides and so
    overstates accuracy on idiosyncratic data; it warns accordingly.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if not participant_wise:
        warnings.warn("row-wise folds mix subjects between training and validation",
                      stacklevel=2)
    folds = fold_assignment(ds, k, participant_wise, seed)
    names = list(features) if features is not None else ds.complete_columns()
    classes = canonical_order(ds.y)
    reports = []
    for f in range(k):
        test = folds == f
        if not test.any():
            continue
        m = train(ds.take(np.flatnonzero(~test)), spec, seed + f, names)
        reports.append(evaluate(m, ds.take(np.flatnonzero(test)), {"fold": f}))
    pooled = pool_reports(reports, classes, {"k": k, "participant_wise": participant_wise,
                                             "seed": seed, "kind": spec.kind})
    return CVResult(pooled, reports, participant_wise, k)


@dataclass
class RunSummary:
    """Accuracy across repeated runs with a normal-approximation 95% interval."""

    accuracies: list[float]
    chance_level: float
    meta: dict = field(default_factory=dict)

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std(self) -> float:
        return float(np.std(self.accuracies, ddof=1)) if len(self.accuracies) > 1 else 0.0

    @property
    def ci95(self) -> tuple[float, float]:
        half = 1.96 * self.std / math.sqrt(len(self.accuracies))
        return self.mean - half, self.mean + half

    def to_json(self) -> dict:
        lo, hi = self.ci95
        return {"runs": len(self.accuracies), "mean_accuracy": self.mean, "std": self.std,
                "ci95": [lo, hi], "chance_level": self.chance_level,
                "accuracies": self.accuracies, "meta": self.meta}


def holdout_run(ds: Dataset, spec: ModelSpec, seed: int, test_subjects_per_class=2,
                train_subjects_per_class=None, features=None) -> EvalReport:
    split = participant_split(ds, test_subjects_per_class, seed, train_subjects_per_class)
    m = train(ds.take(split.train), spec, seed, features)
    return evaluate(m, ds.take(split.test), {"seed": seed})


def flip_test(ds: Dataset, class_a: str, class_b: str, fraction: float = 0.5, runs: int = 100,
              seed: int = 0, spec: ModelSpec = ModelSpec(), test_subjects_per_class=2,
              workers: int | None = None) -> RunSummary:
    """Relabel a fraction of ``class_a``'s subjects as ``class_b`` and hold out.

    Only ``class_a`` rows take part, so a classifier can separate the two
    labels only through subject idiosyncrasies and chance is 50%. Run ``i``
    derives separate relabeling and split seeds from ``seed + i``.
    """
    if class_a not in set(ds.y):
        raise ClassMissing(f"class {class_a!r} not present")
    own = ds.take(np.flatnonzero(ds.y == class_a))
    subjects = sorted(set(own.subjects))
    k = int(round(fraction * len(subjects)))
    if not 0 < k < len(subjects):
        raise ValueError(f"fraction {fraction} leaves one label empty")

    def one(s):
        # independent streams: one seed for both would correlate which
        # subjects get relabeled with which get held out
        flip_seed, split_seed = np.random.SeedSequence(s).generate_state(2)
        rng = np.random.default_rng(int(flip_seed))
        chosen = [subjects[i] for i in rng.permutation(len(subjects))[:k]]
        y = own.y.copy()
        y[np.isin(own.subjects, chosen)] = class_b
        flipped = own.with_labels(y)
        return holdout_run(flipped, spec, int(split_seed), test_subjects_per_class).accuracy

    accs = run_many(one, [seed + i for i in range(runs)], workers)
    return RunSummary(accs, 0.5, {"class_a": class_a, "class_b": class_b,
                                  "fraction": fraction, "seed": seed, "kind": spec.kind})


def repeated_holdout(ds: Dataset, spec: ModelSpec, runs: int, seed: int = 0,
                     test_subjects_per_class=2, train_subjects_per_class=None,
                     features=None, workers: int | None = None) -> RunSummary:
    accs = run_many(lambda s: holdout_run(ds, spec, s, test_subjects_per_class,
                                          train_subjects_per_class, features).accuracy,
                    [seed + i for i in range(runs)], workers)
    return RunSummary(accs, 1.0 / len(ds.classes), {"seed": seed, "kind": spec.kind})


def most_frequent_features(ds: Dataset, spec: ModelSpec | None = None, runs: int = 150,
                           top_k: int = 7, seed: int = 0, test_subjects_per_class=2,
                           importance: str = "MRMR", workers: int | None = None) -> FeatureRanking:
    """Tally each run's top-``top_k`` features over ``runs`` participant splits.

    A run's importance list is the mRMR (or chi-square) ranking on its
    training side. ``spec`` is accepted for symmetry with the other
    protocols; the importance source does not depend on the fitted model.
    Ties in frequency go to the lower mean rank position.
    """
    ranker = rank_mrmr if importance.upper() == "MRMR" else rank_chi_square
    names = ds.complete_columns()
    base = ds.select(names)

    def one(s):
        split = participant_split(base, test_subjects_per_class, s)
        r = ranker(base.take(split.train))
        return r.names[:top_k]

    per_run = run_many(one, [seed + i for i in range(runs)], workers)
    counts = Counter(n for top in per_run for n in top)
    positions: dict[str, list[int]] = {}
    for top in per_run:
        for i, n in enumerate(top):
            positions.setdefault(n, []).append(i)
    order = sorted(counts, key=lambda n: (-counts[n], float(np.mean(positions[n])), n))[:top_k]
    return FeatureRanking(MODEL_FREQUENCY, order, [float(counts[n]) for n in order],
                          {"runs": runs, "importance": importance, "seed": seed,
                           "counts": dict(counts), "per_run": per_run})


@dataclass
class CrossDomainResult:
    per_dataset: dict[str, EvalReport]
    pooled: EvalReport
    shared_dims: tuple[str, ...]

    def to_json(self) -> dict:
        return {"shared_dims": list(self.shared_dims),
                "per_dataset": {k: v.to_json(include_roc=False) for k, v in self.per_dataset.items()},
                "pooled": self.pooled.to_json(include_roc=False)}


def cross_domain_evaluate(train_ds: Dataset, test_dss: Sequence[Dataset], shared_dims: Sequence[str],
                          spec: ModelSpec = ModelSpec(kind=BAGGED_TREES), seed: int = 0
                          ) -> CrossDomainResult:
    """Train on one dataset restricted to ``shared_dims``, test on each of the others."""
    shared_dims = tuple(shared_dims)
    for d in [train_ds, *test_dss]:
        lacking = [n for n in shared_dims if n not in d.feature_names]
        if lacking:
            raise MissingSharedDim(f"dataset {d.domain_tag or '?'} lacks {lacking}")
    m = train(train_ds, spec, seed, shared_dims)
    per = {}
    for i, d in enumerate(test_dss):
        per[d.domain_tag or f"test{i}"] = evaluate(m, d, {"domain": d.domain_tag})
    pooled = evaluate(m, concat([d.select(shared_dims) for d in test_dss]),
                      {"domain": "pooled", "train_domain": train_ds.domain_tag})
    return CrossDomainResult(per, pooled, shared_dims)


@dataclass
class SplitModeComparison:
    row_wise: list[float]
    participant_wise: list[float]

    @property
    def delta(self) -> float:
        return float(np.mean(self.row_wise) - np.mean(self.participant_wise))


def compare_split_modes(ds: Dataset, spec: ModelSpec, k: int = 5, seeds: Sequence[int] = range(20),
                        workers: int | None = None) -> SplitModeComparison:
    """Pooled CV accuracy with row-wise vs participant-wise folds for each seed."""
    def one(s):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            row = kfold_cv(ds, k, False, spec, s).pooled.accuracy
        part = kfold_cv(ds, k, True, spec, s).pooled.accuracy
        return row, part

    res = run_many(one, list(seeds), workers)
    return SplitModeComparison([r for r, _ in res], [p for _, p in res])


def random_split_holdout(ds: Dataset, spec: ModelSpec, fraction: float, seed: int) -> EvalReport:
    split = random_split(ds, fraction, seed)
    m = train(ds.take(split.train), spec, seed)
    return evaluate(m, ds.take(split.test), {"seed": seed, "split": "random"})
