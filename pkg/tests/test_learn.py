import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gazekit.datasets import Dataset
from gazekit.errors import DegenerateData, MissingSharedDim, SchemaMismatch, SingleClass, TooManyFolds
from gazekit.learn import (
    BAGGED_TREES,
    KINDS,
    LOGISTIC,
    RANDOM_FOREST,
    EvalReport,
    Model,
    ModelSpec,
    auc_trapezoid,
    compare_split_modes,
    cross_domain_evaluate,
    evaluate,
    fold_assignment,
    forest_spec,
    gain_ratio,
    kfold_cv,
    most_frequent_features,
    mutual_information,
    predict,
    rank_chi_square,
    rank_gain_ratio,
    rank_mrmr,
    rank_significance,
    repeated_holdout,
    roc_curve,
    run_many,
    train,
)
from gazekit.synth import (
    blob_profiles,
    gen_classed_dataset,
    gen_gain_ratio_dataset,
    significance_profiles,
)


@pytest.fixture(scope="module")
def blobs():
    ds, truth = gen_classed_dataset(blob_profiles(3, 3, 3.0), 6, 20, seed=0)
    return ds, truth


@pytest.mark.parametrize("kind", KINDS)
def test_every_family_fits_and_round_trips(blobs, kind):
    ds, _ = blobs
    m = train(ds, ModelSpec(kind=kind, n_trees=10), seed=3)
    assert evaluate(m, ds).accuracy > 0.8
    back = Model.loads(m.dumps())
    assert np.array_equal(back.scores(ds.X), m.scores(ds.X))
    assert back.to_json() == m.to_json()
    label, s = predict(m, ds.X[0])
    assert np.allclose(s, m.scores(ds.X[:1])[0], rtol=1e-12, atol=1e-12)
    assert label == m.predict_labels(ds.X[:1])[0]
    assert predict(m, dict(zip(ds.feature_names, ds.X[0])))[0] == label


def test_serialized_format_fields(blobs):
    ds, _ = blobs
    doc = train(ds, forest_spec(3)).to_json()
    assert {"format", "version", "kind", "hyperparameters", "standardization",
            "parameters", "feature_schema", "classes"} <= set(doc)
    doc["version"] = 99
    with pytest.raises(ValueError):
        Model.from_json(doc)


def test_training_errors(blobs):
    ds, _ = blobs
    with pytest.raises(SingleClass):
        train(ds.take(np.flatnonzero(ds.y == "Expert")))
    X = ds.X.copy()
    X[:, :] = 1.0
    with pytest.raises(DegenerateData):
        train(ds.with_values(X))
    m = train(ds)
    with pytest.raises(SchemaMismatch):
        m.scores(ds.X[:, :2])
    with pytest.raises(SchemaMismatch):
        predict(m, [1.0])
    with pytest.raises(ValueError):
        ModelSpec(kind="Perceptron")


def test_roc_and_auc():
    fpr, tpr = roc_curve([1, 1, 0, 0], [0.9, 0.8, 0.3, 0.1])
    assert auc_trapezoid(fpr, tpr) == 1.0
    fpr, tpr = roc_curve([1, 0, 1, 0], [0.5, 0.5, 0.5, 0.5])
    assert auc_trapezoid(fpr, tpr) == 0.5


def test_report_json_and_confusion_csv():
    y = ["Novice", "Expert", "Expert", "Novice"]
    p = ["Novice", "Novice", "Expert", "Novice"]
    S = np.array([[1, 0], [0.6, 0.4], [0.2, 0.8], [0.9, 0.1]])
    r = EvalReport.from_predictions(y, p, S, ("Novice", "Expert"))
    assert r.accuracy == 0.75
    assert r.recall == {"Novice": 1.0, "Expert": 0.5}
    assert r.miss_rate["Expert"] == 0.5
    assert r.confusion_csv().splitlines()[1] == "Novice,2,0"
    doc = r.to_json()
    assert doc["chance_level"] == 0.5 and "roc" in doc


def test_evaluate_pads_unseen_classes(blobs):
    ds, _ = blobs
    two = ds.take(np.flatnonzero(ds.y != "Expert"))
    m = train(two)
    r = evaluate(m, ds)
    assert r.classes[-1] == "Expert" and r.recall["Expert"] == 0.0
    with pytest.raises(MissingSharedDim):
        evaluate(m, ds.select(ds.feature_names[:1]))


def test_fold_assignment_is_participant_wise_and_stratified(blobs):
    ds, _ = blobs
    folds = fold_assignment(ds, 6, True, 0)
    for s in set(ds.subjects):
        assert len(set(folds[ds.subjects == s])) == 1
    for f in range(6):
        assert sorted(set(ds.y[folds == f])) == sorted(ds.classes)
    with pytest.raises(TooManyFolds):
        kfold_cv(ds, 19)


def test_row_wise_cv_warns(blobs):
    ds, _ = blobs
    with pytest.warns(UserWarning):
        res = kfold_cv(ds, 5, False, ModelSpec(), 0)
    assert res.pooled.n == len(ds)
    assert res.k == 5 and len(res.folds) == 5


def test_run_many_keeps_seed_order():
    assert run_many(lambda s: s * 2, [3, 1, 2], workers=3) == [6, 2, 4]


def test_repeated_holdout_is_deterministic(blobs):
    ds, _ = blobs
    a = repeated_holdout(ds, ModelSpec(), 4, seed=5)
    b = repeated_holdout(ds, ModelSpec(), 4, seed=5, workers=2)
    assert a.accuracies == b.accuracies
    lo, hi = a.ci95
    assert lo <= a.mean <= hi


def test_mutual_information_basics():
    a = np.array([0, 0, 1, 1])
    assert mutual_information(a, a) == pytest.approx(math.log(2))
    assert mutual_information(a, np.array([0, 1, 0, 1])) == pytest.approx(0.0)


def test_mrmr_penalizes_redundant_copy():
    rng = np.random.default_rng(0)
    n = 600
    y = rng.integers(0, 2, n)
    strong = y * 2.0 + rng.normal(0, 1, n)
    copy = strong + rng.normal(0, 0.01, n)
    other = y * 1.2 + rng.normal(0, 1, n)
    ds = Dataset(np.c_[strong, copy, other], np.array(["Novice", "Expert"])[y],
                 [f"s{i}" for i in range(n)], [f"t{i}" for i in range(n)],
                 ("strong", "copy", "other"))
    r = rank_mrmr(ds)
    assert r.names[0] in ("strong", "copy")
    assert r.names[1] == "other"
    assert list(r.scores) == sorted(r.scores, reverse=True)
    chi = rank_chi_square(ds)
    assert sorted(chi.names) == ["copy", "other", "strong"]
    assert chi.names[-1] == "other"


def test_significance_selects_shifted_features():
    from gazekit.synth.generator import gen_classed_dataset as gcd
    ds, _ = gcd(significance_profiles(), 27, 10, seed=0)
    r = rank_significance(ds)
    assert "saccade_duration_ms_min" not in r.names
    assert len(r.names) == 6
    assert all(p < 0.011 for n, p in r.details["max_pairwise_p"].items() if n in r.names)


def test_gain_ratio_ranking_on_surgeon_fixture():
    ds = gen_gain_ratio_dataset(100, seed=0)
    r = rank_gain_ratio(ds)
    assert r.names[0] == "time_to_first_fixation_ms"
    assert gain_ratio([1, 2, 3, 4], ["a", "a", "b", "b"]) == 1.0
    assert gain_ratio([1, 1, 1], ["a", "b", "a"]) == 0.0


def test_most_frequent_features_counts(blobs):
    ds, _ = blobs
    r = most_frequent_features(ds, runs=6, top_k=2, seed=0, test_subjects_per_class=2)
    assert len(r.names) == 2
    assert sum(r.details["counts"].values()) == 12
    assert all(len(run) == 2 for run in r.details["per_run"])
    assert r.scores == sorted(r.scores, reverse=True)


def test_cross_domain_uses_shared_dims(blobs):
    ds, _ = blobs
    other = ds.with_values(ds.X + 0.1)
    object.__setattr__(other, "domain_tag", "other")
    res = cross_domain_evaluate(ds, [other], ["f0", "f1"], ModelSpec(kind=BAGGED_TREES, n_trees=5))
    assert res.shared_dims == ("f0", "f1")
    assert res.pooled.n == len(other)
    with pytest.raises(MissingSharedDim):
        cross_domain_evaluate(ds, [other.select(["f0"])], ["f0", "f1"])


def test_compare_split_modes_shape():
    ds, _ = gen_classed_dataset(blob_profiles(3, 2, 1.0), 5, 6, seed=1, subject_offset_sigma=3.0)
    res = compare_split_modes(ds, forest_spec(5), k=5, seeds=range(2))
    assert len(res.row_wise) == len(res.participant_wise) == 2


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 4), st.integers(0, 10**6))
def test_pooled_cv_counts_every_row_once(k, seed):
    ds, _ = gen_classed_dataset(blob_profiles(3, 2, 2.0), 4, 3, seed=seed % 1000)
    r = kfold_cv(ds, k, True, ModelSpec(max_iter=50), seed)
    assert r.pooled.n == len(ds)
    assert np.array_equal(r.pooled.confusion, sum(f.confusion for f in r.folds))
