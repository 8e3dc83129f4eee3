import io
import json
import sys

import pytest

from gazekit.cli import EXIT_BUDGET, EXIT_CONFIG, EXIT_IO, EXIT_OK, EXIT_STAGE, main


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert run("synth", "classed", "--out-dir", d / "blobs", "--n-subjects", 4,
               "--n-trials", 10, "--seed", 1) == EXIT_OK
    assert run("synth", "confusion", "--out-dir", d / "conf", "--n-subjects", 6,
               "--duration", 30) == EXIT_OK
    assert run("train", "--confusion", d / "conf", "--kind", "RandomForest", "--n-trees", 5,
               "--out-dir", d / "conf") == EXIT_OK
    return d


def test_pipeline_writes_report_and_provenance(tmp_path):
    out = tmp_path / "p"
    assert run("pipeline", "--out-dir", out, "--n-subjects", 3, "--n-trials", 2,
               "--duration", 4) == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert 0.0 <= report["accuracy"] <= 1.0
    prov = json.loads((out / "pipeline.provenance.json").read_text())
    assert {"config_hash", "seed", "versions", "outputs"} <= set(prov)
    assert "report.json" in prov["outputs"]


def test_reruns_are_byte_identical(tmp_path, corpus):
    ds = corpus / "blobs" / "dataset.csv"
    files = ("split.json", "model.json", "report.json", "report.confusion.csv",
             "split.provenance.json", "train.provenance.json", "evaluate.provenance.json")
    snapshots = []
    for _ in range(2):
        assert run("split", ds, "--out-dir", tmp_path, "--test-subjects", 1) == EXIT_OK
        assert run("train", ds, "--split", tmp_path / "split.json",
                   "--out-dir", tmp_path) == EXIT_OK
        assert run("evaluate", tmp_path / "model.json", ds, "--split",
                   tmp_path / "split.json", "--out-dir", tmp_path) == EXIT_OK
        snapshots.append({f: (tmp_path / f).read_bytes() for f in files})
    assert snapshots[0] == snapshots[1]


def test_event_and_feature_commands(tmp_path):
    assert run("synth", "recording", "--out-dir", tmp_path, "--duration", 3) == EXIT_OK
    rec = tmp_path / "T00.ndjson"
    assert run("detect-events", rec, "--out-dir", tmp_path, "--preset", "smi") == EXIT_OK
    assert (tmp_path / "events.csv").read_text().startswith("kind,")
    assert "per_reason" in json.loads((tmp_path / "cleaning.json").read_text())
    assert run("extract-features", rec, rec, "--out-dir", tmp_path) == EXIT_OK
    assert len((tmp_path / "features.csv").read_text().splitlines()) == 3


def test_ingest_command(tmp_path):
    log = tmp_path / "log.csv"
    log.write_text("Time,X,Y\n0,1,2\n4,2,3\n")
    schema = tmp_path / "schema.toml"
    schema.write_text('time_unit = "ms"\n[columns]\nt_us = "Time"\npor_x = "X"\npor_y = "Y"\n')
    assert run("ingest", log, "--schema", schema, "--subject", "S1", "--rate", 250,
               "--px-per-degree", 40, "--out-dir", tmp_path) == EXIT_OK
    assert (tmp_path / "log.ndjson").exists()


def test_ranking_mff_and_flip(tmp_path, corpus):
    ds = corpus / "blobs" / "dataset.csv"
    for method in ("mrmr", "chi2", "significance", "gain-ratio"):
        assert run("rank-features", ds, "--method", method, "--out-dir", tmp_path) == EXIT_OK
    assert run("mff", ds, "--runs", 4, "--top-k", 2, "--test-subjects", 1,
               "--out-dir", tmp_path) == EXIT_OK
    table = (tmp_path / "mff.frequency.csv").read_text().splitlines()
    assert table[0] == "feature,count,frequency"
    assert run("flip-test", "--runs", 4, "--n-subjects", 6, "--n-trials", 5,
               "--out-dir", tmp_path, "--json") == EXIT_OK
    doc = json.loads((tmp_path / "flip_test.json").read_text())
    assert doc["runs"] == 4 and "within_chance_band" in doc


def test_cross_domain(tmp_path, corpus):
    ds = corpus / "blobs" / "dataset.csv"
    assert run("cross-domain", "--train", ds, "--test", ds, "--shared-dims", "f0,f1",
               "--normalize", "--n-trees", 3, "--out-dir", tmp_path) == EXIT_OK
    doc = json.loads((tmp_path / "cross_domain.json").read_text())
    assert doc["shared_dims"] == ["f0", "f1"]
    assert run("cross-domain", "--train", ds, "--test", ds, "--shared-dims", "f0,zz",
               "--out-dir", tmp_path) == EXIT_STAGE


def test_stream_detect_from_stdin(tmp_path, corpus, monkeypatch, capsys):
    rec = next((corpus / "conf" / "recordings").glob("*.ndjson"))
    monkeypatch.setattr(sys, "stdin", io.StringIO(rec.read_text()))
    code = run("stream-detect", corpus / "conf" / "model.json", "-", "--capacity", 200,
               "--latency-report", "lat.json", "--out-dir", tmp_path)
    assert code == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    first = json.loads(lines[0])
    assert set(first) == {"t_us", "label", "score", "latency_us"}
    summary = json.loads((tmp_path / "lat.json").read_text())
    assert summary["n"] == len(lines)


def test_stream_detect_budget_exit(tmp_path, corpus):
    rec = next((corpus / "conf" / "recordings").glob("*.ndjson"))
    code = run("stream-detect", corpus / "conf" / "model.json", rec, "--capacity", 200,
               "--output", "out.jsonl", "--budget-ms", 1e-9, "--enforce-budget",
               "--out-dir", tmp_path)
    assert code == EXIT_BUDGET


def test_config_file_defaults_and_overrides(tmp_path, corpus):
    ds = corpus / "blobs" / "dataset.csv"
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 3, "split": {"test_subjects": 2}}))
    assert run("split", ds, "--config", cfg, "--out-dir", tmp_path) == EXIT_OK
    prov = json.loads((tmp_path / "split.provenance.json").read_text())
    assert prov["seed"] == 3 and prov["config"]["test_subjects"] == 2
    assert run("split", ds, "--config", cfg, "--seed", 4, "--out-dir", tmp_path) == EXIT_OK
    prov = json.loads((tmp_path / "split.provenance.json").read_text())
    assert prov["seed"] == 4


def test_error_exit_codes(tmp_path, corpus):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"split": {"no_such_option": 1}}))
    ds = corpus / "blobs" / "dataset.csv"
    assert run("split", ds, "--config", bad, "--out-dir", tmp_path) == EXIT_CONFIG
    assert run("split", tmp_path / "missing.csv", "--out-dir", tmp_path) == EXIT_IO
    assert run("split", ds, "--test-subjects", 9, "--out-dir", tmp_path) == EXIT_STAGE
    assert run("train", "--out-dir", tmp_path) == EXIT_CONFIG
    assert run("synth", "confusion", "--duration", 5, "--out-dir", tmp_path) == EXIT_STAGE
