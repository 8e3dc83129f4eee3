"""Streaming confusion detection over a sliding sample queue."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .datasets import balanced_event_training_set, label_confusion_windows
from .errors import SchemaMismatch, TimeRegression
from .features import DEFAULT_QUEUE_CAPACITY, ONLINE_FIELDS, SampleQueue
from .ingest import GazeSample, Recording
from .labels import CONFUSION_EVENT, NO_EVENT
from .learn.metrics import EvalReport
from .learn.models import Model, ModelSpec, forest_spec, predict, train
from .learn.protocols import CVResult, evaluate, kfold_cv

DEFAULT_LATENCY_BUDGET_MS = 40.0


@dataclass(frozen=True)
class DetectorConfig:
    model: Model
    queue_capacity: int = DEFAULT_QUEUE_CAPACITY
    prediction_stride: int = 1
    latency_budget_ms: float = DEFAULT_LATENCY_BUDGET_MS
    max_invalid_fraction: float = 0.5

    def __post_init__(self):
        if self.queue_capacity < 2:
            raise ValueError("queue_capacity must be >= 2")
        if self.prediction_stride < 1:
            raise ValueError("prediction_stride must be >= 1")
        if not self.latency_budget_ms > 0:
            raise ValueError("latency_budget_ms must be positive")
        if not 0.0 <= self.max_invalid_fraction <= 1.0:
            raise ValueError("max_invalid_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class DetectionOutput:
    t_us: int
    label: str
    score: float
    latency_us: float

    def to_json(self) -> dict:
        return {"t_us": self.t_us, "label": self.label, "score": self.score,
                "latency_us": self.latency_us}


@dataclass(frozen=True)
class LatencySummary:
    n: int
    mean_ms: float | None
    p95_ms: float | None
    max_ms: float | None
    budget_ms: float

    @classmethod
    def from_outputs(cls, outputs: Sequence[DetectionOutput], budget_ms: float) -> "LatencySummary":
        if not outputs:
            return cls(0, None, None, None, budget_ms)
        ms = np.array([o.latency_us for o in outputs]) / 1000.0
        return cls(len(ms), float(ms.mean()), float(np.percentile(ms, 95)), float(ms.max()),
                   budget_ms)

    @property
    def within_budget(self) -> bool:
        return self.n == 0 or self.p95_ms <= self.budget_ms

    def to_json(self) -> dict:
        return {"n": self.n, "mean_ms": self.mean_ms, "p95_ms": self.p95_ms,
                "max_ms": self.max_ms, "budget_ms": self.budget_ms,
                "within_budget": self.within_budget}


def _check_model(m: Model) -> None:
    if tuple(m.feature_schema) != ONLINE_FIELDS:
        raise SchemaMismatch(f"detector needs a model over {ONLINE_FIELDS}, "
                             f"got {m.feature_schema}")
    if not set(m.classes) <= {NO_EVENT, CONFUSION_EVENT} or len(m.classes) != 2:
        raise SchemaMismatch(f"detector needs a {NO_EVENT}/{CONFUSION_EVENT} model")


class Detector:
    """Single-writer streaming detector.

    Every ``prediction_stride`` pushes once the queue is full, the queue's
    delta sample is classified. Outputs are withheld, and ``quality_flag``
    raised, while the queue is mostly invalid or a field has no data.
    """

    def __init__(self, cfg: DetectorConfig):
        _check_model(cfg.model)
        self.cfg = cfg
        self._score_index = list(cfg.model.classes).index(CONFUSION_EVENT)
        self.reset()

    def reset(self) -> None:
        self.queue = SampleQueue(self.cfg.queue_capacity)
        self.n_pushed = 0
        self.n_suppressed = 0
        self.quality_flag = False
        self._last_t: int | None = None

    def push(self, sample: GazeSample) -> DetectionOutput | None:
        t0 = time.perf_counter()
        if self._last_t is not None and sample.t_us < self._last_t:
            raise TimeRegression(f"timestamp {sample.t_us} precedes {self._last_t}")
        self._last_t = sample.t_us
        self.queue.push(sample)
        self.n_pushed += 1
        if not self.queue.is_full:
            return None
        if (self.n_pushed - self.cfg.queue_capacity) % self.cfg.prediction_stride:
            return None
        delta = self.queue.running_delta()
        if delta.invalid_fraction > self.cfg.max_invalid_fraction or not delta.finite:
            self.n_suppressed += 1
            self.quality_flag = True
            return None
        self.quality_flag = False
        label, scores = predict(self.cfg.model, delta.values)
        latency = (time.perf_counter() - t0) * 1e6
        return DetectionOutput(int(sample.t_us), label, float(scores[self._score_index]), latency)

    def feed(self, samples: Iterable[GazeSample]) -> list[DetectionOutput]:
        out = []
        for s in samples:
            o = self.push(s)
            if o is not None:
                out.append(o)
        return out


def detector_new(cfg: DetectorConfig) -> Detector:
    return Detector(cfg)


def run_offline(detector: Detector, rec: Recording) -> tuple[list[DetectionOutput], LatencySummary]:
    """Replay a recording through a reset detector."""
    detector.reset()
    outputs = detector.feed(rec)
    return outputs, LatencySummary.from_outputs(outputs, detector.cfg.latency_budget_ms)


@dataclass
class ConfusionTraining:
    model: Model
    report: EvalReport
    train_subjects: tuple[str, ...]
    test_subjects: tuple[str, ...]
    cv: CVResult | None = None
    meta: dict = field(default_factory=dict)


def train_confusion_model(corpus: Sequence[tuple[Recording, Sequence[int]]], seed: int = 0,
                          spec: ModelSpec | None = None, half_window_ms: float = 1000.0,
                          train_fraction_subjects: float = 2 / 3,
                          cv_folds: int | None = None) -> ConfusionTraining:
    """Fit a per-sample confusion classifier on a subject-wise balanced set.

    ``corpus`` pairs each recording with its reported confusion times. The
    model takes the 9 online features, so the detector can apply it to queue
    means. Evaluation uses the held-out subjects' balanced samples.
    """
    spec = spec or forest_spec()
    labelled = [(rec, label_confusion_windows(rec, times, half_window_ms))
                for rec, times in corpus]
    sets = balanced_event_training_set(labelled, train_fraction_subjects, seed)
    model = train(sets.train, spec, seed, ONLINE_FIELDS)
    report = evaluate(model, sets.test, {"seed": seed, "train_rows": len(sets.train),
                                         "test_rows": len(sets.test)})
    cv = kfold_cv(sets.train, cv_folds, True, spec, seed, ONLINE_FIELDS) if cv_folds else None
    return ConfusionTraining(model, report, sets.train_subjects, sets.test_subjects, cv,
                             {"half_window_ms": half_window_ms, "chance_level": 0.5,
                              "n_trees": spec.n_trees})


def budget_exceeded(summary: LatencySummary) -> bool:
    return not summary.within_budget and not math.isnan(summary.p95_ms or 0.0)
