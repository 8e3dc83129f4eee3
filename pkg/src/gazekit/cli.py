"""``gazekit`` command-line entry point.

Every command writes its artifacts plus ``<command>.provenance.json`` into
``--out-dir``. Exit codes: 0 success, 2 configuration error, 3 I/O error,
4 stage error, 5 latency budget exceeded.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import os
import platform
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .datasets import (
    Split,
    dataset_manifest,
    dataset_to_csv,
    leave_one_subject_out,
    load_dataset,
    participant_split,
    random_split,
    zscore_per_dataset,
)
from .errors import ConfigError, GazeKitError, StageError
from .events import (
    CleaningLimits,
    SMI_PEAK_THRESHOLD,
    SOCCER_PURSUIT_PX,
    clean_saccades,
    detect_events,
    events_to_csv,
    split_smooth_pursuits,
)
from .features import SCHEMAS, SOCCER46, extract_trial_features, write_feature_table
from .ingest import (
    RecordingMeta,
    iter_canonical,
    load_config_file,
    load_schema,
    parse_recording,
    read_canonical,
    write_canonical,
)
from .learn.metrics import EvalReport
from .learn.models import KINDS, RANDOM_FOREST, Model, ModelSpec, train
from .learn.protocols import (
    cross_domain_evaluate,
    evaluate,
    flip_test,
    most_frequent_features,
    repeated_holdout,
)
from .learn.selection import RANKERS

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_STAGE = 4
EXIT_BUDGET = 5

RANK_METHODS = {"mrmr": "MRMR", "chi2": "ChiSquare", "significance": "MannWhitneySignificance",
                "gain-ratio": "GainRatio"}


# ---------------------------------------------------------------- helpers

def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonable(v):
    if isinstance(v, Path):
        return str(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


def config_hash(cfg: dict) -> str:
    text = json.dumps(_jsonable(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


@dataclass
class Context:
    command: str
    args: argparse.Namespace
    out_dir: Path

    def __post_init__(self):
        self.outputs: list[str] = []
        self.inputs: list[str] = []

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def write(self, name: str, text: str) -> Path:
        p = self.path(name)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text, encoding="utf-8")
        self.outputs.append(name)
        return p

    def write_json(self, name: str, obj) -> Path:
        return self.write(name, _dump(obj))

    def use_input(self, path) -> Path:
        p = Path(path)
        if str(path) != "-":
            if not p.exists():
                raise FileNotFoundError(f"input not found: {p}")
            self.inputs.append(str(p))
        return p

    def resolved_config(self) -> dict:
        skip = {"func", "config", "out_dir", "json"}
        return {k: _jsonable(v) for k, v in sorted(vars(self.args).items()) if k not in skip}

    def provenance(self) -> dict:
        cfg = self.resolved_config()
        return {
            "command": self.command,
            "config": cfg,
            "config_hash": config_hash({"command": self.command, **cfg}),
            "seed": getattr(self.args, "seed", None),
            "runs": getattr(self.args, "runs", None),
            "inputs": {p: _sha256_file(p) for p in self.inputs if os.path.isfile(p)},
            "outputs": sorted(self.outputs),
            "versions": {"gazekit": __version__, "numpy": np.__version__,
                         "scipy": scipy.__version__, "python": platform.python_version()},
        }

    def report(self, obj: dict, line: str) -> None:
        if self.args.json:
            print(json.dumps(obj, sort_keys=True))
        else:
            print(line)


def _stage(name, fn, *a, **kw):
    try:
        return fn(*a, **kw)
    except (GazeKitError, ValueError, KeyError) as exc:
        if isinstance(exc, (ConfigError, StageError)):
            raise
        raise StageError(name, exc) from exc


def _read_recording(path):
    with open(path, encoding="utf-8") as fh:
        return read_canonical(fh)


def _model_spec(args) -> ModelSpec:
    kw = {"kind": args.kind}
    for k in ("n_trees", "max_depth", "min_leaf", "C", "max_iter"):
        v = getattr(args, k, None)
        if v is not None:
            kw[k] = v
    try:
        return ModelSpec(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _trial_pipeline(rec, args):
    events = detect_events(rec, args.threshold, args.min_fixation_ms)
    report = clean_saccades(events, rec, CleaningLimits(args.max_velocity, args.max_accel))
    return split_smooth_pursuits(report.kept, args.pursuit_px), report


def _load_split(path) -> Split:
    return Split.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def _eval_outputs(ctx: Context, report: EvalReport, stem: str = "report") -> None:
    ctx.write_json(f"{stem}.json", report.to_json())
    ctx.write(f"{stem}.confusion.csv", report.confusion_csv())


# ---------------------------------------------------------------- commands

def cmd_ingest(ctx: Context):
    a = ctx.args
    src = ctx.use_input(a.input)
    schema = load_schema(ctx.use_input(a.schema))
    meta = RecordingMeta(a.subject, a.trial or src.stem, a.rate, a.px_per_degree, a.class_label)
    rec = _stage("ingest", parse_recording, src.read_bytes(), schema, meta)
    buf = io.StringIO()
    write_canonical(rec, buf)
    name = f"{meta.trial_id}.ndjson"
    ctx.write(name, buf.getvalue())
    summary = {"samples": len(rec), "valid": int(rec.valid.sum()),
               "dropouts": int(rec.dropouts.size), "output": name}
    ctx.report(summary, f"ingested {len(rec)} samples -> {ctx.path(name)}")


def cmd_detect_events(ctx: Context):
    rec = _read_recording(ctx.use_input(ctx.args.input))
    events, report = _stage("detect-events", _trial_pipeline, rec, ctx.args)
    ctx.write("events.csv", events_to_csv(events))
    summary = report.summary()
    ctx.write_json("cleaning.json", summary)
    ctx.report(summary, f"{len(events)} events, removed {summary['removed']} of "
                        f"{summary['saccades']} saccades")


def cmd_extract_features(ctx: Context):
    a = ctx.args
    rows = []
    for path in a.inputs:
        rec = _read_recording(ctx.use_input(path))
        events, _ = _stage("extract-features", _trial_pipeline, rec, a)
        rows.append(_stage("extract-features", extract_trial_features, events, rec, a.profile))
    text, mask = write_feature_table(rows)
    ctx.write("features.csv", text)
    ctx.write_json("features.mask.json", mask)
    ctx.report({"rows": len(rows), "profile": a.profile},
               f"{len(rows)} trials x {len(rows[0].names)} features -> {ctx.path('features.csv')}")


def _load_ds(ctx: Context, path):
    p = ctx.use_input(path)
    return _stage("load-dataset", load_dataset, p)


def cmd_split(ctx: Context):
    a = ctx.args
    ds = _load_ds(ctx, a.dataset)
    if a.mode == "participant":
        test = a.fraction if a.fraction is not None else a.test_subjects
        split = _stage("split", participant_split, ds, test, a.seed, a.train_subjects)
        ctx.write_json("split.json", split.to_json())
        out = {"mode": a.mode, "train": len(split.train), "test": len(split.test)}
    elif a.mode == "random":
        split = _stage("split", random_split, ds, a.fraction if a.fraction is not None else 0.3,
                       a.seed)
        ctx.write_json("split.json", split.to_json())
        out = {"mode": a.mode, "train": len(split.train), "test": len(split.test)}
    else:
        splits = leave_one_subject_out(ds)
        ctx.write_json("splits.json", {"mode": "leave-one-out",
                                       "splits": [s.to_json() for s in splits]})
        out = {"mode": a.mode, "splits": len(splits)}
    ctx.report(out, " ".join(f"{k}={v}" for k, v in out.items()))


def _train_confusion(ctx: Context):
    from .online import train_confusion_model
    a = ctx.args
    root = ctx.use_input(a.confusion)
    times = json.loads(ctx.use_input(root / "confusion_times.json").read_text(encoding="utf-8"))
    corpus = [(_read_recording(ctx.use_input(root / "recordings" / f"{tid}.ndjson")), t)
              for tid, t in sorted(times.items())]
    spec = _model_spec(a) if a.kind != "LinearSvmOva" or a.n_trees else None
    res = _stage("train", train_confusion_model, corpus, a.seed, spec)
    ctx.write("model.json", _dump(res.model.to_json()))
    _eval_outputs(ctx, res.report)
    ctx.report(res.report.to_json(include_roc=False),
               f"confusion model: held-out balanced accuracy {res.report.accuracy:.4f}")


def cmd_train(ctx: Context):
    a = ctx.args
    if a.confusion:
        return _train_confusion(ctx)
    if not a.dataset:
        raise ConfigError("train needs a dataset or --confusion")
    ds = _load_ds(ctx, a.dataset)
    if a.split:
        ds = ds.take(_load_split(ctx.use_input(a.split)).train)
    features = a.features.split(",") if a.features else None
    model = _stage("train", train, ds, _model_spec(a), a.seed, features)
    ctx.write("model.json", _dump(model.to_json()))
    ctx.report({"kind": model.kind, "features": len(model.feature_schema), "rows": len(ds)},
               f"trained {model.kind} on {len(ds)} rows -> {ctx.path('model.json')}")


def cmd_evaluate(ctx: Context):
    a = ctx.args
    model = Model.loads(ctx.use_input(a.model).read_text(encoding="utf-8"))
    ds = _load_ds(ctx, a.dataset)
    if a.split:
        ds = ds.take(_load_split(ctx.use_input(a.split)).test)
    report = _stage("evaluate", evaluate, model, ds)
    _eval_outputs(ctx, report)
    ctx.report(report.to_json(include_roc=False),
               f"accuracy {report.accuracy:.4f} (chance {report.chance_level:.4f}) on {report.n} rows")


def cmd_rank_features(ctx: Context):
    a = ctx.args
    ds = _load_ds(ctx, a.dataset)
    ranker = RANKERS[RANK_METHODS[a.method]]
    ranking = _stage("rank-features", ranker, ds.select(ds.complete_columns()))
    ctx.write_json("ranking.json", _finite(ranking.to_json()))
    ctx.report(ranking.to_json(), "\n".join(f"{n}\t{s:.6g}"
                                            for n, s in zip(ranking.names, ranking.scores)))


def _finite(obj):
    if isinstance(obj, float):
        return obj if np.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def cmd_mff(ctx: Context):
    a = ctx.args
    ds = _load_ds(ctx, a.dataset)
    ranking = _stage("mff", most_frequent_features, ds, None, a.runs, a.top_k, a.seed,
                     a.test_subjects, a.importance, a.workers)
    ctx.write_json("mff.json", ranking.to_json())
    counts = ranking.details["counts"]
    lines = ["feature,count,frequency"] + [
        f"{n},{counts[n]},{counts[n] / a.runs:.6f}"
        for n in sorted(counts, key=lambda n: (-counts[n], n))]
    ctx.write("mff.frequency.csv", "\n".join(lines) + "\n")
    if a.evaluate:
        summary = _stage("mff", repeated_holdout, ds, _model_spec(a), a.runs, a.seed,
                         a.test_subjects, None, ranking.names, a.workers)
        ctx.write_json("mff.accuracy.json", summary.to_json())
    ctx.report(ranking.to_json(), "\n".join(f"{n}\t{int(s)}/{a.runs}"
                                            for n, s in zip(ranking.names, ranking.scores)))


def cmd_flip_test(ctx: Context):
    a = ctx.args
    if a.dataset:
        ds = _load_ds(ctx, a.dataset)
    else:
        from .synth import blob_profiles, gen_classed_dataset
        profs = blob_profiles(2, 4, a.separation, classes=[a.class_a, a.class_b])
        ds, _ = gen_classed_dataset(profs, a.n_subjects, a.n_trials, a.seed,
                                    a.subject_offset_sigma)
    summary = _stage("flip-test", flip_test, ds, a.class_a, a.class_b, a.fraction, a.runs,
                     a.seed, _model_spec(a), a.test_subjects, a.workers)
    out = summary.to_json()
    out["within_chance_band"] = abs(summary.mean - summary.chance_level) <= a.chance_tolerance
    ctx.write_json("flip_test.json", out)
    lo, hi = summary.ci95
    ctx.report(out, f"mean accuracy {summary.mean:.4f} (95% CI {lo:.4f}-{hi:.4f}), "
                    f"chance {summary.chance_level:.2f}")


def cmd_cross_domain(ctx: Context):
    a = ctx.args
    train_ds = _load_ds(ctx, a.train)
    tests = [_load_ds(ctx, p) for p in a.test]
    for d, p in zip(tests, a.test):
        if not d.domain_tag:
            object.__setattr__(d, "domain_tag", Path(p).stem)
    if a.normalize:
        normed, _ = zscore_per_dataset([train_ds, *tests])
        train_ds, tests = normed[0], normed[1:]
    shared = a.shared_dims.split(",")
    spec = _model_spec(a)
    res = _stage("cross-domain", cross_domain_evaluate, train_ds, tests, shared, spec, a.seed)
    ctx.write_json("cross_domain.json", res.to_json())
    ctx.write("cross_domain.pooled.confusion.csv", res.pooled.confusion_csv())
    ctx.report(res.to_json(), "\n".join(f"{k}\t{v.accuracy:.4f}" for k, v in res.per_dataset.items())
               + f"\npooled\t{res.pooled.accuracy:.4f}")


def cmd_stream_detect(ctx: Context):
    from .online import DetectorConfig, LatencySummary, detector_new
    a = ctx.args
    model = Model.loads(ctx.use_input(a.model).read_text(encoding="utf-8"))
    cfg = DetectorConfig(model, a.capacity, a.stride, a.budget_ms, a.max_invalid)
    det = _stage("stream-detect", detector_new, cfg)
    fh = sys.stdin if a.input == "-" else open(ctx.use_input(a.input), encoding="utf-8")
    out = sys.stdout if a.output == "-" else open(ctx.path(a.output), "w", encoding="utf-8")
    outputs = []
    try:
        _, samples = iter_canonical(fh)
        for s in samples:
            o = _stage("stream-detect", det.push, s)
            if o is not None:
                outputs.append(o)
                out.write(json.dumps(o.to_json()) + "\n")
    finally:
        if fh is not sys.stdin:
            fh.close()
        if out is not sys.stdout:
            out.close()
            ctx.outputs.append(a.output)
    summary = LatencySummary.from_outputs(outputs, a.budget_ms)
    doc = {**summary.to_json(), "suppressed": det.n_suppressed, "pushed": det.n_pushed}
    if a.latency_report:
        ctx.write_json(a.latency_report, doc)
    if a.output != "-":
        ctx.report(doc, f"{len(outputs)} predictions, p95 {summary.p95_ms} ms")
    if a.enforce_budget and not summary.within_budget:
        print(f"p95 latency {summary.p95_ms:.3f} ms exceeds budget {a.budget_ms} ms",
              file=sys.stderr)
        return EXIT_BUDGET
    return EXIT_OK


def cmd_synth(ctx: Context):
    from . import synth
    a = ctx.args
    if a.kind == "recording":
        prof = synth.load_class_profile(a.profile)
        rec, truth = synth.gen_recording(prof, a.duration or 10.0, a.rate, a.seed, a.subject, a.trial)
        buf = io.StringIO()
        write_canonical(rec, buf)
        ctx.write(f"{a.trial}.ndjson", buf.getvalue())
        ctx.write_json(f"{a.trial}.truth.json", truth.to_json())
        ctx.report({"samples": len(rec), "events": len(truth.events)},
                   f"{len(rec)} samples, {len(truth.events)} planted events")
    elif a.kind == "soccer":
        profs = synth.soccer_profiles()
        rng = np.random.default_rng(a.seed)
        truths = {}
        for c, prof in profs.items():
            for s in range(a.n_subjects):
                sid = f"{c[:3].upper()}{s:02d}"
                for t in range(a.n_trials):
                    tid = f"{sid}-T{t:02d}"
                    rec, truth = synth.gen_recording(prof, a.duration or 10.0, a.rate,
                                                     int(rng.integers(2**63 - 1)), sid, tid)
                    buf = io.StringIO()
                    write_canonical(rec, buf)
                    ctx.write(f"recordings/{tid}.ndjson", buf.getvalue())
                    truths[tid] = truth.to_json()
        ctx.write_json("truth.json", truths)
        ctx.report({"recordings": len(truths)}, f"{len(truths)} recordings")
    elif a.kind == "classed":
        profs = synth.blob_profiles(a.n_classes, a.n_dims, a.separation)
        ds, truth = synth.gen_classed_dataset(profs, a.n_subjects, a.n_trials, a.seed,
                                              a.subject_offset_sigma)
        ctx.write("dataset.csv", dataset_to_csv(ds))
        ctx.write_json("dataset.manifest.json", dataset_manifest(ds))
        ctx.write_json("truth.json", {"bayes_accuracy": truth.bayes_accuracy,
                                      "subject_offset_sigma": truth.subject_offset_sigma,
                                      "subject_class": truth.subject_class})
        ctx.report({"rows": len(ds), "bayes_accuracy": truth.bayes_accuracy},
                   f"{len(ds)} rows, Bayes accuracy {truth.bayes_accuracy:.4f}")
    elif a.kind == "confusion":
        corpus = synth.gen_confusion_corpus(shift_sigma=a.shift, n_subjects=a.n_subjects,
                                            seed=a.seed, dilation=a.dilation,
                                            duration_s=a.duration)
        times = {}
        for rec, t in corpus.items:
            buf = io.StringIO()
            write_canonical(rec, buf)
            ctx.write(f"recordings/{rec.trial_id}.ndjson", buf.getvalue())
            times[rec.trial_id] = t
        ctx.write_json("confusion_times.json", times)
        ctx.report({"recordings": len(times), "events": corpus.n_events},
                   f"{len(times)} recordings, {corpus.n_events} confusion events")
    else:
        raise ConfigError(f"unknown synth kind {a.kind!r}")


def cmd_pipeline(ctx: Context):
    """Synthetic soccer corpus -> features -> participant split -> model -> report."""
    from . import synth
    a = ctx.args
    profs = synth.soccer_profiles()
    ds, _ = _stage("synth", synth.gen_trace_dataset, profs, a.n_subjects, a.n_trials, a.seed,
                   a.duration, a.rate, a.profile)
    ctx.write("features.csv", dataset_to_csv(ds))
    ctx.write_json("features.manifest.json", dataset_manifest(ds))
    split = _stage("split", participant_split, ds, a.test_subjects, a.seed)
    ctx.write_json("split.json", split.to_json())
    model = _stage("train", train, ds.take(split.train), _model_spec(a), a.seed)
    ctx.write("model.json", _dump(model.to_json()))
    report = _stage("evaluate", evaluate, model, ds.take(split.test))
    _eval_outputs(ctx, report)
    ctx.report(report.to_json(include_roc=False),
               f"accuracy {report.accuracy:.4f} (chance {report.chance_level:.4f})")


# ---------------------------------------------------------------- parser

def _add_event_args(p):
    p.add_argument("--threshold", type=float, default=50.0, help="I-VT threshold in deg/s")
    p.add_argument("--preset", choices=["default", "smi"], default="default",
                   help="smi sets the threshold to 40 deg/s")
    p.add_argument("--min-fixation-ms", type=float, default=50.0)
    p.add_argument("--pursuit-px", type=float, default=SOCCER_PURSUIT_PX)
    p.add_argument("--max-velocity", type=float, default=1000.0)
    p.add_argument("--max-accel", type=float, default=100000.0)


def _add_model_args(p, kind=None):
    p.add_argument("--kind", choices=KINDS, default=kind or "LinearSvmOva")
    p.add_argument("--n-trees", type=int)
    p.add_argument("--max-depth", type=int)
    p.add_argument("--min-leaf", type=int)
    p.add_argument("-C", "--box-constraint", dest="C", type=float)
    p.add_argument("--max-iter", type=int)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--runs", type=int, default=1)
    common.add_argument("--out-dir", type=Path, default=Path("."))
    common.add_argument("--json", action="store_true", help="print machine-readable reports")
    common.add_argument("--config", type=Path, help="JSON or TOML file of option defaults")
    common.add_argument("--workers", type=int, default=min(4, os.cpu_count() or 1))

    parser = argparse.ArgumentParser(prog="gazekit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(func=func)
        return p

    p = add("ingest", cmd_ingest, "parse a delimited tracker log into canonical NDJSON")
    p.add_argument("input")
    p.add_argument("--schema", required=True)
    p.add_argument("--subject", required=True)
    p.add_argument("--trial")
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--px-per-degree", type=float, required=True)
    p.add_argument("--class-label")

    p = add("detect-events", cmd_detect_events, "detect and clean gaze events")
    p.add_argument("input")
    _add_event_args(p)

    p = add("extract-features", cmd_extract_features, "per-trial feature table")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--profile", choices=sorted(k for k in SCHEMAS if k != "Online9"),
                   default=SOCCER46)
    _add_event_args(p)

    p = add("split", cmd_split, "train/test split")
    p.add_argument("dataset")
    p.add_argument("--mode", choices=["participant", "random", "loso"], default="participant")
    p.add_argument("--test-subjects", type=int, default=2)
    p.add_argument("--train-subjects", type=int)
    p.add_argument("--fraction", type=float)

    p = add("train", cmd_train, "fit a classifier")
    p.add_argument("dataset", nargs="?")
    p.add_argument("--confusion", help="directory written by `synth confusion`; "
                                       "fits the online confusion model")
    p.add_argument("--split")
    p.add_argument("--features", help="comma-separated feature subset")
    _add_model_args(p)

    p = add("evaluate", cmd_evaluate, "score a model on a dataset")
    p.add_argument("model")
    p.add_argument("dataset")
    p.add_argument("--split")

    p = add("rank-features", cmd_rank_features, "rank features")
    p.add_argument("dataset")
    p.add_argument("--method", choices=sorted(RANK_METHODS), default="mrmr")

    p = add("mff", cmd_mff, "most frequent features over repeated participant splits")
    p.add_argument("dataset")
    p.add_argument("--top-k", type=int, default=7)
    p.add_argument("--test-subjects", type=int, default=2)
    p.add_argument("--importance", choices=["MRMR", "ChiSquare"], default="MRMR")
    p.add_argument("--evaluate", action="store_true", help="also hold-out accuracy with the MFF set")
    _add_model_args(p)

    p = add("flip-test", cmd_flip_test, "relabel half of one class and measure accuracy")
    p.add_argument("--dataset")
    p.add_argument("--class-a", default="Expert")
    p.add_argument("--class-b", default="Intermediate")
    p.add_argument("--fraction", type=float, default=0.5)
    p.add_argument("--test-subjects", type=int, default=2)
    p.add_argument("--chance-tolerance", type=float, default=0.07)
    p.add_argument("--n-subjects", type=int, default=12, help="synthetic subjects per class")
    p.add_argument("--n-trials", type=int, default=52)
    p.add_argument("--separation", type=float, default=4.0)
    p.add_argument("--subject-offset-sigma", type=float, default=0.3)
    _add_model_args(p)

    p = add("cross-domain", cmd_cross_domain, "train on one dataset, test on others")
    p.add_argument("--train", required=True)
    p.add_argument("--test", nargs="+", required=True)
    p.add_argument("--shared-dims", required=True)
    p.add_argument("--normalize", action="store_true", help="z-score each dataset first")
    _add_model_args(p, "BaggedTrees")

    p = add("stream-detect", cmd_stream_detect, "replay a recording through the online detector")
    p.add_argument("model")
    p.add_argument("input", nargs="?", default="-")
    p.add_argument("--output", default="-", help="JSON-lines file in --out-dir, or - for stdout")
    p.add_argument("--capacity", type=int, default=2000)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--budget-ms", type=float, default=40.0)
    p.add_argument("--max-invalid", type=float, default=0.5)
    p.add_argument("--latency-report")
    p.add_argument("--enforce-budget", action="store_true")

    p = add("synth", cmd_synth, "generate synthetic recordings or datasets")
    p.add_argument("kind", choices=["recording", "soccer", "classed", "confusion"])
    p.add_argument("--profile", default="soccer_novice")
    p.add_argument("--duration", type=float, default=None,
                   help="seconds; defaults to 10 for recordings, the profile's length for confusion")
    p.add_argument("--rate", type=float, default=250.0)
    p.add_argument("--subject", default="S00")
    p.add_argument("--trial", default="T00")
    p.add_argument("--n-subjects", type=int, default=4)
    p.add_argument("--n-trials", type=int, default=4)
    p.add_argument("--n-classes", type=int, default=3)
    p.add_argument("--n-dims", type=int, default=4)
    p.add_argument("--separation", type=float, default=2.0)
    p.add_argument("--subject-offset-sigma", type=float, default=0.0)
    p.add_argument("--shift", type=float, default=2.0)
    p.add_argument("--dilation", type=float, default=0.0)

    p = add("pipeline", cmd_pipeline, "end-to-end run on a synthetic soccer corpus")
    p.add_argument("--n-subjects", type=int, default=4)
    p.add_argument("--n-trials", type=int, default=6)
    p.add_argument("--duration", type=float, default=8.0)
    p.add_argument("--rate", type=float, default=250.0)
    p.add_argument("--test-subjects", type=int, default=1)
    p.add_argument("--profile", choices=["Soccer46", "Surgeon38"], default=SOCCER46)
    _add_model_args(p)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    """Parse ``argv``; values from ``--config`` become defaults that flags override."""
    args = parser.parse_args(argv)
    if args.config is None:
        return args
    try:
        cfg = load_config_file(args.config)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a mapping")
    section = {**{k: v for k, v in cfg.items() if not isinstance(v, dict)},
               **cfg.get(args.command, {})}
    section = {k.replace("-", "_"): v for k, v in section.items()}
    known = set(vars(args))
    unknown = sorted(set(section) - known)
    if unknown:
        raise ConfigError(f"unknown config keys for {args.command}: {unknown}")
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    subparser.set_defaults(**section)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        if getattr(args, "preset", None) == "smi":
            args.threshold = SMI_PEAK_THRESHOLD
        ctx = Context(args.command, args, args.out_dir)
        args.out_dir.mkdir(parents=True, exist_ok=True)
        code = args.func(ctx) or EXIT_OK
        ctx.write_json(f"{args.command}.provenance.json", ctx.provenance())
        return code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        print(f"stage error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except (OSError, json.JSONDecodeError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (GazeKitError, ValueError) as exc:
        print(f"stage error: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
