import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gazekit.datasets import (
    Dataset,
    Split,
    balanced_event_training_set,
    concat,
    flip_labels,
    label_confusion_windows,
    leave_one_subject_out,
    load_dataset,
    oversample,
    participant_split,
    random_split,
    save_dataset,
    smote,
    zscore_per_dataset,
)
from gazekit.errors import ClassMissing, InsufficientSubjects, TimeOutOfRange, TooFewRows
from gazekit.labels import CONFUSION_EVENT, NO_EVENT
from gazekit.synth import blob_profiles, gen_classed_dataset, gen_confusion_corpus


@pytest.fixture(scope="module")
def ds():
    d, _ = gen_classed_dataset(blob_profiles(3, 3, 2.0), 5, 4, seed=0)
    return d


def test_participant_split_keeps_subjects_whole(ds):
    sp = participant_split(ds, 2, seed=1)
    train_s, test_s = set(ds.subjects[sp.train]), set(ds.subjects[sp.test])
    assert not train_s & test_s
    assert len(test_s) == 6
    assert len(sp.train) + len(sp.test) == len(ds)


def test_participant_split_counts_and_errors(ds):
    sp = participant_split(ds, {"Novice": 1, "Intermediate": 2, "Expert": 1}, 0, 2)
    assert len(set(ds.subjects[sp.test])) == 4
    assert len(set(ds.subjects[sp.train])) == 6
    with pytest.raises(InsufficientSubjects):
        participant_split(ds, 5, 0)


def test_split_determinism_and_json(ds):
    a, b = participant_split(ds, 2, 7), participant_split(ds, 2, 7)
    assert np.array_equal(a.train, b.train)
    back = Split.from_json(a.to_json())
    assert np.array_equal(back.test, a.test) and back.seed == 7
    with pytest.raises(ValueError):
        Split([1, 2], [2, 3])


def test_random_split_size():
    d, _ = gen_classed_dataset(blob_profiles(3, 2, 1.0), 3, 90, seed=0)
    assert len(d) == 810
    assert len(random_split(d, 0.3, 0).test) == 243


def test_loso(ds):
    splits = leave_one_subject_out(ds)
    assert len(splits) == 15
    assert all(len(set(ds.subjects[s.test])) == 1 for s in splits)


def test_flip_labels(ds):
    assert np.array_equal(flip_labels(ds, "Expert", "Novice", 0.0, 0).y, ds.y)
    f = flip_labels(ds, "Expert", "Novice", 0.5, 0)
    assert len(f) == len(ds)
    changed = set(ds.subjects[f.y != ds.y])
    assert len(changed) == 2 * round(0.5 * 5)
    with pytest.raises(ClassMissing):
        flip_labels(ds, "Expert", "Surgeon", 0.5, 0)


def test_smote_errors_and_identity():
    rows = np.random.default_rng(0).normal(size=(6, 2))
    assert smote(rows, 3, 6, 0).shape == (0, 2)
    with pytest.raises(TooFewRows):
        smote(rows, 6, 10, 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 5), st.integers(0, 40), st.integers(0, 10**6))
def test_smote_provenance_reconstructs_points(k, extra, seed):
    rows = np.random.default_rng(seed).normal(size=(k + 3, 3))
    out, base, nn, u = smote(rows, k, len(rows) + extra, seed, return_provenance=True)
    assert len(out) == extra
    assert np.allclose(rows[base] + u[:, None] * (rows[nn] - rows[base]), out, atol=1e-12)
    assert np.all((u >= 0) & (u <= 1)) and np.all(base != nn)


def test_oversample_balances_classes(ds):
    sub = ds.take(np.r_[0:20, 20:28, 40:44])
    grown = oversample(sub, 20, k=3)
    assert {c: int((grown.y == c).sum()) for c in grown.classes} == \
        {c: 20 for c in grown.classes}


def test_zscore_per_dataset():
    d, _ = gen_classed_dataset(blob_profiles(3, 2, 1.0), 3, 10, seed=0)
    shifted = d.with_values(d.X * 5 + 100)
    (za, zb), tables = zscore_per_dataset([d, shifted])
    assert np.allclose(za.X, zb.X)
    assert np.allclose(za.X.mean(axis=0), 0) and np.allclose(za.X.std(axis=0), 1)
    const = d.with_values(np.c_[d.X[:, :1], np.ones(len(d))])
    (zc,), (t,) = zscore_per_dataset([const])
    assert t.zero_variance.tolist() == [False, True]
    assert zc.missing[:, 1].all()


def test_concat_and_missing_mask(ds):
    both = concat([ds, ds])
    assert len(both) == 2 * len(ds)
    X = ds.X.copy()
    X[0, 0] = np.nan
    assert ds.with_values(X).complete_columns() == list(ds.feature_names[1:])


def test_dataset_file_round_trip(ds, tmp_path):
    X = ds.X.copy()
    X[3, 1] = np.nan
    d = ds.with_values(X)
    save_dataset(d, tmp_path / "d.csv")
    back = load_dataset(tmp_path / "d.csv")
    assert np.array_equal(back.X, d.X, equal_nan=True)
    assert back.y.tolist() == d.y.tolist()
    assert back.domain_tag == d.domain_tag
    assert (tmp_path / "d.manifest.json").exists()


def test_confusion_windows_inclusive():
    corpus = gen_confusion_corpus(n_subjects=3, duration_s=30.0, seed=0)
    rec, times = corpus.items[0]
    labels = label_confusion_windows(rec, times, 1000.0)
    inside = np.abs(rec.t_us - times[0]) <= 1_000_000
    assert np.array_equal(labels == CONFUSION_EVENT, inside)
    with pytest.raises(TimeOutOfRange):
        label_confusion_windows(rec, [10**12])


def test_balanced_event_sets():
    corpus = gen_confusion_corpus(n_subjects=6, duration_s=30.0, seed=1)
    labelled = [(r, label_confusion_windows(r, t)) for r, t in corpus.items]
    sets = balanced_event_training_set(labelled, 2 / 3, seed=0)
    assert len(sets.train_subjects) == 4 and len(sets.test_subjects) == 2
    assert not set(sets.train_subjects) & set(sets.test_subjects)
    for part in (sets.train, sets.test):
        assert (part.y == CONFUSION_EVENT).sum() == (part.y == NO_EVENT).sum()
    with pytest.raises(InsufficientSubjects):
        balanced_event_training_set(labelled[:2])


def test_dataset_validates_shapes():
    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 2)), ["a"], ["s"], ["t"], ("f0", "f1"))
    with pytest.raises(ValueError):
        Dataset(np.zeros((1, 1)), ["Expert"], [""], ["t"], ("f0",))
