"""Feature rankings: mRMR, chi-square, Mann-Whitney significance, gain ratio."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ..datasets import Dataset

MRMR = "MRMR"
CHI_SQUARE = "ChiSquare"
MANN_WHITNEY = "MannWhitneySignificance"
GAIN_RATIO = "GainRatio"
MODEL_FREQUENCY = "ModelFrequency"

DEFAULT_BINS = 10
SIGNIFICANCE_ALPHA = 0.011


@dataclass
class FeatureRanking:
    method: str
    names: list[str]
    scores: list[float]
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.names) != len(self.scores):
            raise ValueError("names and scores differ in length")

    def top(self, k: int) -> list[str]:
        return self.names[:k]

    def to_json(self) -> dict:
        return {"method": self.method,
                "ranking": [{"feature": n, "score": s} for n, s in zip(self.names, self.scores)],
                "details": self.details}


def discretize(x, bins: int = DEFAULT_BINS) -> np.ndarray:
    """Equal-frequency bin codes; NaN gets its own code ``bins``."""
    x = np.asarray(x, dtype=float)
    codes = np.full(x.shape, bins, dtype=np.int64)
    ok = np.isfinite(x)
    if ok.any():
        edges = np.quantile(x[ok], np.linspace(0, 1, bins + 1)[1:-1])
        codes[ok] = np.searchsorted(edges, x[ok], side="right")
    return codes


def mutual_information(a, b) -> float:
    """Plug-in mutual information (nats) between two discrete code vectors."""
    a = np.asarray(a)
    b = np.asarray(b)
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    joint = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(joint, (ai, bi), 1.0)
    joint /= joint.sum()
    pa = joint.sum(axis=1, keepdims=True)
    pb = joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    return float(np.sum(joint[nz] * np.log(joint[nz] / (pa @ pb)[nz])))


def _class_codes(y) -> np.ndarray:
    _, inv = np.unique(np.asarray(y, dtype=str), return_inverse=True)
    return inv


def rank_mrmr(ds: Dataset, n_select: int | None = None, bins: int = DEFAULT_BINS) -> FeatureRanking:
    """Greedy minimum-redundancy maximum-relevance ranking.

    Relevance is MI(feature; class) and redundancy the mean MI with the
    already-picked features, both on equal-frequency bins. ``scores`` are
    the greedy criteria clipped to be non-increasing; the raw values are in
    ``details["criterion"]``.
    """
    names = list(ds.feature_names)
    d = len(names)
    n_select = d if n_select is None else min(n_select, d)
    codes = [discretize(ds.X[:, j], bins) for j in range(d)]
    cls = _class_codes(ds.y)
    relevance = np.array([mutual_information(c, cls) for c in codes])
    redundancy_sum = np.zeros(d)
    chosen, criteria = [], []
    remaining = list(range(d))
    for step in range(n_select):
        if step == 0:
            crit = relevance[remaining]
        else:
            last = chosen[-1]
            for j in remaining:
                redundancy_sum[j] += mutual_information(codes[j], codes[last])
            crit = relevance[remaining] - redundancy_sum[remaining] / step
        i = int(np.argmax(crit))
        criteria.append(float(crit[i]))
        chosen.append(remaining.pop(i))
    scores = np.minimum.accumulate(criteria).tolist() if criteria else []
    return FeatureRanking(MRMR, [names[j] for j in chosen], scores,
                          {"criterion": criteria,
                           "relevance": dict(zip(names, relevance.tolist()))})


def rank_chi_square(ds: Dataset, bins: int = DEFAULT_BINS) -> FeatureRanking:
    """Chi-square statistic of binned feature vs class, descending."""
    cls = _class_codes(ds.y)
    out = []
    for j, name in enumerate(ds.feature_names):
        codes = discretize(ds.X[:, j], bins)
        _, ci = np.unique(codes, return_inverse=True)
        table = np.zeros((ci.max() + 1, cls.max() + 1))
        np.add.at(table, (ci, cls), 1.0)
        expected = table.sum(axis=1, keepdims=True) * table.sum(axis=0, keepdims=True) / table.sum()
        chi2 = float(np.sum((table - expected) ** 2 / np.where(expected > 0, expected, 1.0)))
        out.append((chi2, name))
    out.sort(key=lambda t: (-t[0], ds.feature_names.index(t[1])))
    return FeatureRanking(CHI_SQUARE, [n for _, n in out], [s for s, _ in out])


def mann_whitney_p(a, b) -> float:
    """Two-sided Mann-Whitney U p-value (exact for small untied samples)."""
    return float(stats.mannwhitneyu(a, b, alternative="two-sided", method="auto").pvalue)


def rank_significance(ds: Dataset, alpha: float = SIGNIFICANCE_ALPHA) -> FeatureRanking:
    """Features whose every class pair differs by a Mann-Whitney test at ``alpha``.

    Ranked by the largest pairwise p-value, ascending; the score is
    ``1 - max p``. All p-values, selected or not, are in ``details``.
    """
    classes = ds.classes
    pvals = {}
    for j, name in enumerate(ds.feature_names):
        col = ds.X[:, j]
        groups = [col[(ds.y == c) & np.isfinite(col)] for c in classes]
        if any(len(g) < 2 for g in groups):
            pvals[name] = math.nan
            continue
        pvals[name] = max(mann_whitney_p(a, b) for a, b in itertools.combinations(groups, 2))
    chosen = [(p, n) for n, p in pvals.items() if not math.isnan(p) and p < alpha]
    chosen.sort(key=lambda t: (t[0], ds.feature_names.index(t[1])))
    return FeatureRanking(MANN_WHITNEY, [n for _, n in chosen], [1.0 - p for p, _ in chosen],
                          {"alpha": alpha, "max_pairwise_p": pvals})


def _entropy(counts) -> float:
    counts = np.asarray(counts, dtype=float)
    tot = counts.sum()
    if tot == 0:
        return 0.0
    p = counts[counts > 0] / tot
    return float(-(p * np.log2(p)).sum())


def gain_ratio(x, y) -> float:
    """Gain ratio of the best (max information gain) binary threshold on ``x``."""
    x = np.asarray(x, dtype=float)
    ok = np.isfinite(x)
    x, cls = x[ok], _class_codes(np.asarray(y)[ok])
    n = x.size
    if n < 2:
        return 0.0
    K = cls.max() + 1
    order = np.argsort(x, kind="stable")
    xs = x[order]
    Y = np.eye(K)[cls[order]]
    cl = np.cumsum(Y, axis=0)[:-1]
    total = Y.sum(axis=0)
    cr = total - cl
    nl = np.arange(1, n, dtype=float)
    nr = n - nl
    valid = xs[1:] > xs[:-1]
    if not valid.any():
        return 0.0

    def h(counts, size):
        p = counts / size[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(p > 0, p * np.log2(p), 0.0)
        return -t.sum(axis=1)

    parent = _entropy(total)
    gain = parent - (nl * h(cl, nl) + nr * h(cr, nr)) / n
    gain = np.where(valid, gain, -np.inf)
    i = int(np.argmax(gain))
    frac = nl[i] / n
    split_info = -(frac * math.log2(frac) + (1 - frac) * math.log2(1 - frac))
    return float(gain[i] / split_info) if split_info > 0 else 0.0


def rank_gain_ratio(ds: Dataset) -> FeatureRanking:
    scored = [(gain_ratio(ds.X[:, j], ds.y), n) for j, n in enumerate(ds.feature_names)]
    scored.sort(key=lambda t: (-t[0], ds.feature_names.index(t[1])))
    return FeatureRanking(GAIN_RATIO, [n for _, n in scored], [s for s, _ in scored])


RANKERS = {
    MRMR: rank_mrmr,
    CHI_SQUARE: rank_chi_square,
    MANN_WHITNEY: rank_significance,
    GAIN_RATIO: rank_gain_ratio,
}
