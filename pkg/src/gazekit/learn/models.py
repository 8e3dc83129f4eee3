"""Self-contained classifiers with standardization and JSON serialization.

Supported kinds:

* ``LinearSvmOva`` -- one-vs-all linear SVMs fitted by full-batch subgradient
  descent on the L2-regularized hinge loss (``C`` is the box constraint);
* ``RandomForest`` -- bootstrap CART trees (Gini) with per-split feature
  subsampling;
* ``BaggedTrees`` -- the same trees without feature subsampling;
* ``LogisticRegression`` -- multinomial logistic regression by gradient descent.

Inputs are standardized with training-set statistics stored in the model.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..datasets import Dataset
from ..errors import DegenerateData, SchemaMismatch, SingleClass
from ..labels import canonical_order

MODEL_FORMAT = "gazekit.model"
MODEL_VERSION = 1

LINEAR_SVM = "LinearSvmOva"
RANDOM_FOREST = "RandomForest"
BAGGED_TREES = "BaggedTrees"
LOGISTIC = "LogisticRegression"
KINDS = (LINEAR_SVM, RANDOM_FOREST, BAGGED_TREES, LOGISTIC)

SURGEON_BOX_CONSTRAINT = 11.0174


@dataclass(frozen=True)
class ModelSpec:
    kind: str = LINEAR_SVM
    # trees
    n_trees: int = 50
    max_depth: int | None = None
    min_leaf: int = 1
    max_features: str | int | None = None
    # linear models
    C: float = 1.0
    max_iter: int = 400
    learning_rate: float = 0.5
    l2: float = 1e-4

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        if self.n_trees < 1 or self.min_leaf < 1:
            raise ValueError("n_trees and min_leaf must be >= 1")
        if not self.C > 0:
            raise ValueError("C must be positive")

    @classmethod
    def from_mapping(cls, d) -> "ModelSpec":
        return cls(**dict(d))


def forest_spec(n_trees: int = 50, **kw) -> ModelSpec:
    return ModelSpec(kind=RANDOM_FOREST, n_trees=n_trees, **kw)


SURGEON_SVM = ModelSpec(kind=LINEAR_SVM, C=SURGEON_BOX_CONSTRAINT)


# ---------------------------------------------------------------- trees

@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    _lists: tuple | None = field(default=None, repr=False, compare=False)

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        active = self.feature[node] >= 0
        while active.any():
            r, nd = rows[active], node[active]
            go_left = X[r, self.feature[nd]] <= self.threshold[nd]
            node[r] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return node

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def leaf_value(self, x) -> list:
        # scalar path for the single-sample online case
        if self._lists is None:
            self._lists = (self.feature.tolist(), self.threshold.tolist(),
                           self.left.tolist(), self.right.tolist(), self.value.tolist())
        feat, thr, left, right, value = self._lists
        n = 0
        while feat[n] >= 0:
            n = left[n] if x[feat[n]] <= thr[n] else right[n]
        return value[n]

    def to_json(self) -> dict:
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(),
                "value": self.value.tolist()}

    @classmethod
    def from_json(cls, d) -> "Tree":
        return cls(np.array(d["feature"], dtype=np.int64), np.array(d["threshold"], dtype=float),
                   np.array(d["left"], dtype=np.int64), np.array(d["right"], dtype=np.int64),
                   np.array(d["value"], dtype=float).reshape(len(d["feature"]), -1))


def _best_split(X, Y, features, min_leaf):
    """Best Gini split of rows ``X`` (one-hot targets ``Y``) over ``features``.

    Returns (feature, threshold) or None when no admissible split exists.
    """
    n = X.shape[0]
    best_score, best = -np.inf, None
    lo, hi = min_leaf - 1, n - min_leaf - 1
    if hi < lo:
        return None
    nl = np.arange(1, n, dtype=float)
    nr = n - nl
    for f in features:
        xs = X[:, f]
        order = np.argsort(xs, kind="stable")
        xs = xs[order]
        cl = np.cumsum(Y[order], axis=0)[:-1]
        cr = cl[-1] + Y[order[-1]] - cl
        # sum of squared class counts over size, for each side (maximize)
        score = (cl ** 2).sum(axis=1) / nl + (cr ** 2).sum(axis=1) / nr
        ok = xs[1:] > xs[:-1]
        ok[:lo] = False
        ok[hi + 1:] = False
        if not ok.any():
            continue
        score = np.where(ok, score, -np.inf)
        i = int(np.argmax(score))
        if score[i] > best_score + 1e-12:
            best_score = score[i]
            best = (int(f), 0.5 * (xs[i] + xs[i + 1]))
    return best


def grow_tree(X, y, n_classes, rng, max_depth=None, min_leaf=1, max_features=None) -> Tree:
    """Grow one CART classification tree. ``y`` holds class indices."""
    n, d = X.shape
    Y = np.eye(n_classes)[y]
    k = d if max_features is None else max(1, min(d, int(max_features)))
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts = Y[idx].sum(axis=0)
        value.append(counts / counts.sum())
        return len(feature) - 1

    stack = [(new_node(np.arange(n)), np.arange(n), 0)]
    while stack:
        node, idx, depth = stack.pop()
        if len(idx) < 2 * min_leaf or (max_depth is not None and depth >= max_depth):
            continue
        if value[node].max() == 1.0:
            continue
        feats = np.arange(d) if k == d else rng.choice(d, size=k, replace=False)
        split = _best_split(X[idx], Y[idx], feats, min_leaf)
        if split is None:
            continue
        f, t = split
        mask = X[idx, f] <= t
        li, ri = idx[mask], idx[~mask]
        feature[node], threshold[node] = f, t
        l_node = new_node(li)
        r_node = new_node(ri)
        left[node], right[node] = l_node, r_node
        stack.append((r_node, ri, depth + 1))
        stack.append((l_node, li, depth + 1))
    return Tree(np.array(feature, dtype=np.int64), np.array(threshold, dtype=float),
                np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
                np.array(value, dtype=float))


def _resolve_max_features(spec: ModelSpec, d: int):
    if spec.kind == BAGGED_TREES:
        return None
    mf = spec.max_features
    if mf is None or mf == "sqrt":
        return max(1, int(math.sqrt(d)))
    if mf == "all":
        return None
    if mf == "log2":
        return max(1, int(math.log2(d)))
    return int(mf)


def _fit_forest(Z, y, K, spec: ModelSpec, rng):
    n, d = Z.shape
    mf = _resolve_max_features(spec, d)
    trees = []
    for _ in range(spec.n_trees):
        tree_rng = np.random.default_rng(rng.integers(2**63))
        boot = tree_rng.integers(0, n, size=n)
        trees.append(grow_tree(Z[boot], y[boot], K, tree_rng, spec.max_depth,
                               spec.min_leaf, mf))
    return {"trees": trees}


# ------------------------------------------------------- linear models

def _fit_hinge(Z, t, C, max_iter, lr):
    """Minimize ||w||^2 / (2 C n) + mean(hinge) by subgradient descent.

    ``t`` is +/-1. Step sizes decay as lr / sqrt(iteration); the iterate with
    the lowest objective is returned.
    """
    n, d = Z.shape
    lam = 1.0 / (C * n)
    w = np.zeros(d)
    b = 0.0
    best = (np.inf, w.copy(), b)
    for it in range(1, max_iter + 1):
        margin = t * (Z @ w + b)
        obj = 0.5 * lam * w @ w + np.maximum(0.0, 1.0 - margin).mean()
        if obj < best[0]:
            best = (obj, w.copy(), b)
        active = margin < 1.0
        gw = lam * w - (t[active, None] * Z[active]).sum(axis=0) / n
        gb = -t[active].sum() / n
        step = lr / math.sqrt(it)
        w = w - step * gw
        b = b - step * gb
    margin = t * (Z @ w + b)
    obj = 0.5 * lam * w @ w + np.maximum(0.0, 1.0 - margin).mean()
    if obj < best[0]:
        best = (obj, w, b)
    return best[1], best[2]


def _fit_svm(Z, y, K, spec: ModelSpec):
    W = np.zeros((K, Z.shape[1]))
    b = np.zeros(K)
    for c in range(K):
        t = np.where(y == c, 1.0, -1.0)
        W[c], b[c] = _fit_hinge(Z, t, spec.C, spec.max_iter, spec.learning_rate)
    return {"W": W, "b": b}


def _softmax(S):
    S = S - S.max(axis=1, keepdims=True)
    E = np.exp(S)
    return E / E.sum(axis=1, keepdims=True)


def _fit_logistic(Z, y, K, spec: ModelSpec):
    n, d = Z.shape
    Y = np.eye(K)[y]
    W = np.zeros((K, d))
    b = np.zeros(K)
    for _ in range(spec.max_iter):
        P = _softmax(Z @ W.T + b)
        G = (P - Y) / n
        W -= spec.learning_rate * (G.T @ Z + spec.l2 * W)
        b -= spec.learning_rate * G.sum(axis=0)
    return {"W": W, "b": b}


# --------------------------------------------------------------- model

@dataclass(frozen=True, eq=False)
class Model:
    spec: ModelSpec
    feature_schema: tuple[str, ...]
    classes: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray
    state: dict
    seed: int

    @property
    def kind(self) -> str:
        return self.spec.kind

    @property
    def probabilistic(self) -> bool:
        return self.kind != LINEAR_SVM

    def _standardize(self, X):
        return (np.asarray(X, dtype=float) - self.mean) / self.std

    def scores(self, X) -> np.ndarray:
        """Per-class scores for a batch, shape (n, n_classes).

        Probabilities for forests and logistic regression; signed margins
        for the SVM.
        """
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != len(self.feature_schema):
            raise SchemaMismatch(f"expected {len(self.feature_schema)} features, got {X.shape[1]}")
        Z = self._standardize(X)
        if self.kind in (RANDOM_FOREST, BAGGED_TREES):
            trees = self.state["trees"]
            return sum(t.predict_proba(Z) for t in trees) / len(trees)
        S = Z @ self.state["W"].T + self.state["b"]
        return _softmax(S) if self.kind == LOGISTIC else S

    def predict_labels(self, X) -> np.ndarray:
        S = self.scores(X)
        return np.asarray(self.classes, dtype=object)[np.argmax(S, axis=1)]

    def to_json(self) -> dict:
        state = {}
        if "trees" in self.state:
            state["trees"] = [t.to_json() for t in self.state["trees"]]
        else:
            state = {"W": self.state["W"].tolist(), "b": self.state["b"].tolist()}
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "kind": self.kind,
            "hyperparameters": asdict(self.spec),
            "feature_schema": list(self.feature_schema),
            "classes": list(self.classes),
            "standardization": {"mean": self.mean.tolist(), "std": self.std.tolist()},
            "seed": self.seed,
            "parameters": state,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, d) -> "Model":
        if d.get("format") != MODEL_FORMAT:
            raise ValueError("not a serialized model")
        if d.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {d.get('version')}")
        spec = ModelSpec.from_mapping(d["hyperparameters"])
        p = d["parameters"]
        if "trees" in p:
            state = {"trees": [Tree.from_json(t) for t in p["trees"]]}
        else:
            state = {"W": np.array(p["W"], dtype=float), "b": np.array(p["b"], dtype=float)}
        return cls(spec, tuple(d["feature_schema"]), tuple(d["classes"]),
                   np.array(d["standardization"]["mean"], dtype=float),
                   np.array(d["standardization"]["std"], dtype=float), state, int(d["seed"]))

    @classmethod
    def loads(cls, text: str) -> "Model":
        return cls.from_json(json.loads(text))


def train_arrays(X, y, spec: ModelSpec, seed: int = 0,
                 feature_schema=None, classes=None) -> Model:
    """Fit a model on a raw matrix and label vector (no missing values)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=object)
    if not np.isfinite(X).all():
        raise DegenerateData("training matrix contains missing values")
    classes = tuple(classes or canonical_order(y))
    if len(set(y)) < 2:
        raise SingleClass(f"training data holds a single class: {sorted(set(y))}")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    if not np.any(std > 0):
        raise DegenerateData("every feature has zero variance")
    std = np.where(std > 0, std, 1.0)
    Z = (X - mean) / std
    index = {c: i for i, c in enumerate(classes)}
    yi = np.array([index[c] for c in y], dtype=np.int64)
    K = len(classes)
    rng = np.random.default_rng(seed)
    if spec.kind in (RANDOM_FOREST, BAGGED_TREES):
        state = _fit_forest(Z, yi, K, spec, rng)
    elif spec.kind == LINEAR_SVM:
        state = _fit_svm(Z, yi, K, spec)
    else:
        state = _fit_logistic(Z, yi, K, spec)
    schema = tuple(feature_schema) if feature_schema is not None else \
        tuple(f"f{i}" for i in range(X.shape[1]))
    return Model(spec, schema, classes, mean, std, state, int(seed))


def train(ds: Dataset, spec: ModelSpec = ModelSpec(), seed: int = 0,
          features=None) -> Model:
    """Fit ``spec`` on ``ds``.

    Columns with any missing value are excluded unless ``features`` names an
    explicit subset (which must then be complete).
    """
    names = list(features) if features is not None else ds.complete_columns()
    sub = ds.select(names)
    if sub.missing.any():
        bad = [n for n, m in zip(names, sub.missing.any(axis=0)) if m]
        raise DegenerateData(f"requested features have missing values: {bad}")
    if not names:
        raise DegenerateData("no complete feature columns to train on")
    return train_arrays(sub.X, sub.y, spec, seed, tuple(names))


def predict(m: Model, x) -> tuple[str, np.ndarray]:
    """Class and per-class scores for one feature vector.

    ``x`` is a sequence in the model's schema order or a name->value mapping.
    Ties go to the class listed first in the model's class order.
    """
    if isinstance(x, dict):
        missing = [n for n in m.feature_schema if n not in x]
        if missing:
            raise SchemaMismatch(f"missing features: {missing}")
        x = [x[n] for n in m.feature_schema]
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size != len(m.feature_schema):
        raise SchemaMismatch(f"expected a vector of {len(m.feature_schema)} features")
    if m.kind in (RANDOM_FOREST, BAGGED_TREES):
        z = ((x - m.mean) / m.std).tolist()
        trees = m.state["trees"]
        acc = [0.0] * len(m.classes)
        for t in trees:
            for i, v in enumerate(t.leaf_value(z)):
                acc[i] += v
        s = np.array(acc) / len(trees)
    else:
        s = m.scores(x[None, :])[0]
    return m.classes[int(np.argmax(s))], s


def with_spec(spec: ModelSpec, **changes) -> ModelSpec:
    return replace(spec, **changes)
