import numpy as np
import pytest
from scipy import stats

from gazekit.features import SOCCER46, SURGEON38
from gazekit.ingest import filter_trials
from gazekit.synth import (
    ClassProfile,
    MeasureDist,
    available_profiles,
    bayes_accuracy,
    blob_profiles,
    draw_measure,
    gen_classed_dataset,
    gen_confusion_corpus,
    gen_recording,
    gen_tracking_fixture,
    gen_trace_dataset,
    load_class_profile,
    soccer_profiles,
    surgeon_feature_profiles,
)


def test_bundled_profiles_load():
    names = available_profiles()
    assert {"soccer_novice", "soccer_intermediate", "soccer_expert", "confusion_base"} <= set(names)
    profs = soccer_profiles()
    assert set(profs) == {"Novice", "Intermediate", "Expert"}
    with pytest.raises(FileNotFoundError):
        load_class_profile("no_such_profile")


def test_profile_json_round_trip():
    p = soccer_profiles()["Expert"]
    assert ClassProfile.from_json(p.to_json()) == p
    doc = p.to_json()
    doc["version"] = 2
    with pytest.raises(ValueError):
        ClassProfile.from_json(doc)


def test_truncated_draws_hit_target_mean():
    dist = MeasureDist(mean=250.0, std=120.0, min=60.0, max=900.0)
    x = draw_measure(dist, np.random.default_rng(0), 200_000)
    assert x.min() >= 60.0 and x.max() <= 900.0
    assert x.mean() == pytest.approx(250.0, rel=0.01)


def test_generation_is_deterministic():
    p = soccer_profiles()["Novice"]
    a, ta = gen_recording(p, 3.0, 250.0, seed=9)
    b, tb = gen_recording(p, 3.0, 250.0, seed=9)
    assert np.array_equal(a.data, b.data, equal_nan=True)
    assert ta.to_json() == tb.to_json()


def test_blinks_make_invalid_samples():
    p = soccer_profiles()["Novice"]
    rec, _ = gen_recording(p, 5.0, 250.0, seed=1, invalid_fraction=0.2)
    assert 0.7 <= rec.valid.mean() <= 0.9


def test_trace_dataset_shapes():
    ds, truth = gen_trace_dataset(soccer_profiles(), 2, 2, seed=0, duration_s=4.0)
    assert len(ds) == 12 and len(ds.feature_names) == 46
    assert set(truth.subject_class.values()) == {"Novice", "Intermediate", "Expert"}
    ds38, _ = gen_trace_dataset(soccer_profiles(), 1, 1, seed=0, duration_s=3.0,
                                feature_profile=SURGEON38)
    assert len(ds38.feature_names) == 38


def test_bayes_accuracy_exact_and_monte_carlo_agree():
    two = blob_profiles(2, 3, 2.0, classes=["Novice", "Expert"])
    exact = bayes_accuracy(two)
    assert exact == pytest.approx(stats.norm.cdf(1.0))
    # a 3-class family with a distant third class approaches the 2-class value
    three = blob_profiles(3, 3, 2.0)
    mc = bayes_accuracy(three, n_samples=400_000)
    assert 0.70 < mc < 0.80
    assert bayes_accuracy(two, subject_offset_sigma=1.0) < exact


def test_classed_dataset_subject_offsets():
    ds, truth = gen_classed_dataset(blob_profiles(3, 2, 2.0), 4, 30, seed=0,
                                    subject_offset_sigma=3.0)
    within = np.mean([ds.X[ds.subjects == s].std(axis=0).mean() for s in set(ds.subjects)])
    assert within == pytest.approx(1.0, rel=0.2)
    assert ds.X.std(axis=0).mean() > 2.0
    assert len(truth.subject_offsets) == 12


def test_surgeon_profiles():
    profs = surgeon_feature_profiles()
    assert set(profs) == {"Novice", "Intermediate", "Expert"}


def test_tracking_fixture_drops_exactly_planted_trials():
    recs, bad = gen_tracking_fixture(seed=0)
    assert len(recs) == 33 * 52 and len(bad) == 58
    kept, dropped = filter_trials(recs, 0.75)
    assert len(kept) == 1658
    assert {d.recording.trial_id for d in dropped} == bad


def test_confusion_corpus_shift_inside_windows():
    corpus = gen_confusion_corpus(shift_sigma=2.0, n_subjects=4, seed=0, duration_s=30.0,
                                  subject_offset_sigma=0.0)
    assert corpus.n_events == 4
    rec, times = corpus.items[0]
    inside = np.abs(rec.t_us - times[0]) <= 1_000_000
    gx = rec.data[:, 4]
    shift = (gx[inside].mean() - gx[~inside].mean()) / gx[~inside].std()
    assert shift == pytest.approx(2.0, abs=0.3)
