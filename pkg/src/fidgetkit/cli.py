"""Command-line front end: reproducible runs with manifests.

Exit codes: 0 ok, 2 config error, 3 data error, 4 model error. Logs go to
stderr; data goes to files only.
"""

from __future__ import annotations

import csv
import functools
import json
import sys
from pathlib import Path

import click
import numpy as np

from fidgetkit import __version__
from fidgetkit.adaptors import BoxWidths
from fidgetkit.analysis import (
    average_fidget,
    feature_search,
    linear_classify,
    polarity_report,
)
from fidgetkit.config import RunConfig, load_run_config
from fidgetkit.corpus import load_records, load_truth, open_corpus
from fidgetkit.errors import ConfigError, DataError, FidgetkitError, ModelError
from fidgetkit.fidgets import attach_speaking, encode_fidgets
from fidgetkit.fusion import cross_validate, fit_fold_models, LeakGuard, save_model_bundle
from fidgetkit.gestures import FEATURE_NAMES, body_gesture_features
from fidgetkit.manifest import canonical_json, write_manifest
from fidgetkit.motion import (
    load_action_models,
    save_action_models,
    slice_features,
    train_action_classifier,
)
from fidgetkit.pipeline import (
    build_bundle,
    build_fidget_matrix,
    detect_session,
    label_slices,
    load_and_preprocess,
)
from fidgetkit.synth import Script, make_benchmark, truth_slice_labels, write_session


def _log(msg: str) -> None:
    click.echo(msg, err=True)


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except FidgetkitError as e:
            _log(f"error: {e}")
            sys.exit(e.exit_code)

    return wrapper


@click.group()
@click.version_option(version=__version__)
def main():
    """Body-gesture, self-adaptor, and fidgeting analysis pipeline."""


config_option = click.option(
    "--config", "config_path", type=click.Path(), default=None,
    help="JSON run-config file (or a previous run's manifest); flags override it.",
)
corpus_option = click.option("--corpus", "corpus_dir", type=click.Path(), required=True)
session_option = click.option("--session", required=True, help="Session id, e.g. P01.")


def _load_config(config_path, **overrides) -> RunConfig:
    return load_run_config(config_path, overrides)


def _widths(cfg: RunConfig) -> BoxWidths:
    return BoxWidths(arm_scale=cfg.arm_width_scale, leg_scale=cfg.leg_width_scale)


def _prepared_session(corpus_dir, session, cfg):
    meta, schema = open_corpus(corpus_dir)
    if session not in meta.sessions:
        raise ConfigError(f"session {session!r} not in corpus (has {list(meta.sessions)})")
    data = load_and_preprocess(meta, schema, session)
    return meta, schema, detect_session(data, _widths(cfg))


@main.command()
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--participants", type=int, default=12, show_default=True)
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--fps", type=float, default=26.0, show_default=True)
@click.option("--duration", "duration_s", type=float, default=70.0, show_default=True)
@click.option("--script", "script_path", type=click.Path(), default=None,
              help="Generate a single session from a script JSON instead of a corpus.")
@handle_errors
def synth(out_dir, participants, seed, fps, duration_s, script_path):
    """Generate the deterministic synthetic benchmark corpus."""
    out = Path(out_dir)
    if script_path:
        with open(script_path) as f:
            script = Script.from_json(f.read())
        write_session(out, script)
        _log(f"wrote session {script.session} to {out}")
        inputs = [script_path]
        cfg = json.loads(script.to_json())
    else:
        sessions = make_benchmark(out, n_participants=participants, seed=seed,
                                  fps=fps, duration_s=duration_s)
        _log(f"wrote {len(sessions)} sessions to {out}")
        inputs = []
        cfg = {"participants": participants, "seed": seed, "fps": fps, "duration_s": duration_s}
    write_manifest(out / "manifest.json", "synth", cfg, inputs)


@main.command()
@corpus_option
@session_option
@click.option("--out", "out_path", type=click.Path(), required=True)
@config_option
@handle_errors
def ingest(corpus_dir, session, out_path, config_path):
    """Load, gap-fill, smooth, and align one session; write the bundle as npz."""
    cfg = _load_config(config_path)
    meta, schema = open_corpus(corpus_dir)
    if session not in meta.sessions:
        raise ConfigError(f"session {session!r} not in corpus")
    data = load_and_preprocess(meta, schema, session)
    arrays = {
        "coords": data.seq.coords,
        "confidence": data.seq.confidence,
        "fps": np.array(data.seq.fps),
        "speaking": data.speaking.speaking,
    }
    for name, track in data.tracks.items():
        arrays[name] = track.values
    np.savez(out_path, **arrays)
    write_manifest(Path(str(out_path) + ".manifest.json"), "ingest", cfg.to_dict(),
                   [meta.session_dir(session)])
    _log(f"wrote preprocessed bundle to {out_path}")


@main.command("gesture-stats")
@corpus_option
@session_option
@click.option("--out", "out_path", type=click.Path(), required=True)
@config_option
@click.option("--gesture-threshold", type=float, default=None,
              help="Absolute movement threshold (default: 75th percentile per localization).")
@click.option("--window-length", type=int, default=None)
@click.option("--quiet-run", type=int, default=None)
@handle_errors
def gesture_stats(corpus_dir, session, out_path, config_path, gesture_threshold,
                  window_length, quiet_run):
    """Emit the 20-value body-gesture descriptor as CSV."""
    cfg = _load_config(config_path, gesture_threshold=gesture_threshold,
                       window_length=window_length, quiet_run=quiet_run)
    meta, schema = open_corpus(corpus_dir)
    if session not in meta.sessions:
        raise ConfigError(f"session {session!r} not in corpus")
    data = load_and_preprocess(meta, schema, session)
    vec = body_gesture_features(
        data.seq, window_length=cfg.window_length, quiet_run=cfg.quiet_run,
        threshold=cfg.gesture_threshold,
    )
    with open(out_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(FEATURE_NAMES)
        writer.writerow([repr(vec[name]) for name in FEATURE_NAMES])
    write_manifest(Path(str(out_path) + ".manifest.json"), "gesture-stats", cfg.to_dict(),
                   [meta.session_dir(session)])
    _log(f"wrote gesture stats to {out_path}")


@main.command("detect-adaptors")
@corpus_option
@session_option
@click.option("--out", "out_path", type=click.Path(), required=True)
@config_option
@click.option("--min-duration", type=int, default=None)
@handle_errors
def detect_adaptors(corpus_dir, session, out_path, config_path, min_duration):
    """Emit per-frame location codes: frame, left, right, legs."""
    cfg = _load_config(config_path, min_duration=min_duration)
    meta, schema, data = _prepared_session(corpus_dir, session, cfg)
    tl = data.timeline
    with open(out_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["frame", "left_code", "right_code", "leg_code"])
        for t in range(tl.n_frames):
            writer.writerow([t, tl.left_hand[t], tl.right_hand[t], tl.legs[t]])
    write_manifest(Path(str(out_path) + ".manifest.json"), "detect-adaptors", cfg.to_dict(),
                   [meta.session_dir(session)])
    _log(f"wrote location timeline to {out_path}")


def _fit_action_models(corpus_dir, cfg, model_path):
    meta, schema = open_corpus(corpus_dir)
    slices, labels = [], []
    for session in meta.sessions:
        data = detect_session(load_and_preprocess(meta, schema, session), _widths(cfg))
        truth = load_truth(meta.session_dir(session))
        for sl, lab in zip(data.slices, truth_slice_labels(data.slices, truth)):
            if lab is not None:
                slices.append(sl)
                labels.append(lab)
    models, report = train_action_classifier(slices, labels, meta.fps, seed=cfg.seed)
    save_action_models(models, model_path, schema, meta.fps)
    return report


@main.command("classify-motion")
@corpus_option
@click.option("--model", "model_path", type=click.Path(), required=True)
@click.option("--fit", is_flag=True, help="Train on the corpus ground truth and save the model.")
@click.option("--session", default=None, help="Session to classify (inference mode).")
@click.option("--out", "out_path", type=click.Path(), default=None)
@config_option
@click.option("--seed", type=int, default=None)
@handle_errors
def classify_motion(corpus_dir, model_path, fit, session, out_path, config_path, seed):
    """Train the DYNAMIC/STATIC classifiers, or label one session's slices."""
    cfg = _load_config(config_path, seed=seed)
    if fit:
        report = _fit_action_models(corpus_dir, cfg, model_path)
        write_manifest(Path(str(model_path) + ".manifest.json"), "classify-motion",
                       cfg.to_dict(), [corpus_dir])
        _log(f"saved action models to {model_path}")
        for cat, r in report.items():
            _log(f"  {cat}: acc {r['acc']:.3f}±{r['acc_std']:.3f} f1 {r['f1']:.3f}±{r['f1_std']:.3f}")
        return
    if not session or not out_path:
        raise ConfigError("inference mode needs --session and --out")
    if not Path(model_path).exists():
        raise ModelError(f"action model not found: {model_path} (train with --fit first)")
    meta, schema, data = _prepared_session(corpus_dir, session, cfg)
    models = load_action_models(model_path, schema)
    with open(out_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["session", "category", "window_start", "label", "score"])
        for sl in data.slices:
            model = models.get(sl.category)
            if model is None:
                raise ModelError(f"no classifier for category {sl.category}")
            feats = slice_features(sl, meta.fps)
            writer.writerow([session, sl.category, sl.start, model.classify(feats),
                             repr(model.score(feats))])
    write_manifest(Path(str(out_path) + ".manifest.json"), "classify-motion", cfg.to_dict(),
                   [meta.session_dir(session), model_path])
    _log(f"wrote slice labels to {out_path}")


@main.command("encode-fidgets")
@corpus_option
@session_option
@click.option("--model", "model_path", type=click.Path(), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--speaking/--no-speaking", "with_speaking", default=True, show_default=True)
@config_option
@handle_errors
def encode_fidgets_cmd(corpus_dir, session, model_path, out_path, with_speaking, config_path):
    """Emit the per-frame fidget activation matrix as CSV (rows -> columns)."""
    cfg = _load_config(config_path)
    if not Path(model_path).exists():
        raise ModelError(f"action model not found: {model_path} (train with --fit first)")
    meta, schema, data = _prepared_session(corpus_dir, session, cfg)
    models = load_action_models(model_path, schema)
    matrix = build_fidget_matrix(data, models, with_speaking=with_speaking)
    with open(out_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["frame", *matrix.row_names])
        for t in range(matrix.n_frames):
            writer.writerow([t, *matrix.rows[:, t].tolist()])
    write_manifest(Path(str(out_path) + ".manifest.json"), "encode-fidgets", cfg.to_dict(),
                   [meta.session_dir(session), model_path])
    _log(f"wrote fidget matrix to {out_path}")


def _corpus_bundles(corpus_dir, cfg, action_model_path, fidgets_from):
    meta, schema = open_corpus(corpus_dir)
    records = load_records(corpus_dir)
    models = None
    if fidgets_from == "model":
        if not action_model_path or not Path(action_model_path).exists():
            raise ModelError(
                "evaluate/train-fusion need --action-model (train with classify-motion --fit), "
                "or pass --fidgets-from truth"
            )
        models = load_action_models(action_model_path, schema)
    bundles = {}
    labels = {}
    for session in meta.sessions:
        data = detect_session(load_and_preprocess(meta, schema, session), _widths(cfg))
        if models is not None:
            slice_labels = label_slices(data, models)
        else:
            truth = load_truth(meta.session_dir(session))
            slice_labels = [lab or "STATIC" for lab in truth_slice_labels(data.slices, truth)]
        matrix = attach_speaking(encode_fidgets(data.timeline, data.slices, slice_labels),
                                 data.speaking)
        bundles[session] = build_bundle(data, matrix, groups=tuple(cfg.groups))
        rec = records.get(session)
        if rec is None:
            raise DataError(f"no label record for session {session}")
        labels[session] = rec.depression if cfg.label == "depression" else rec.anxiety
    return meta, bundles, labels


@main.command("train-fusion")
@corpus_option
@config_option
@click.option("--action-model", "action_model_path", type=click.Path(), default=None)
@click.option("--fidgets-from", type=click.Choice(["model", "truth"]), default="model",
              show_default=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--seed", type=int, default=None)
@handle_errors
def train_fusion(corpus_dir, config_path, action_model_path, fidgets_from, out_dir, seed):
    """Fit DDAE+GMM+FV+selection+classifier on the whole corpus; save the bundle."""
    cfg = _load_config(config_path, seed=seed)
    meta, bundles, labels = _corpus_bundles(corpus_dir, cfg, action_model_path, fidgets_from)
    guard = LeakGuard()
    ids = sorted(bundles)
    ddae, gmm, selected, clf, _ = fit_fold_models(
        bundles, labels, train_ids=ids, test_ids=[], config=cfg.fusion(), guard=guard, fold=0
    )
    out = Path(out_dir)
    save_model_bundle(out, ddae, gmm, selected, clf,
                      meta={"label": cfg.label, "groups": list(cfg.groups)})
    inputs = [corpus_dir] + ([action_model_path] if action_model_path else [])
    write_manifest(out / "manifest.json", "train-fusion", cfg.to_dict(), inputs)
    _log(f"saved fusion model bundle to {out}")


@main.command()
@corpus_option
@config_option
@click.option("--action-model", "action_model_path", type=click.Path(), default=None)
@click.option("--fidgets-from", type=click.Choice(["model", "truth"]), default="model",
              show_default=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--seed", type=int, default=None)
@handle_errors
def evaluate(corpus_dir, config_path, action_model_path, fidgets_from, out_dir, seed):
    """Participant-independent cross-validation of the fusion pipeline."""
    cfg = _load_config(config_path, seed=seed)
    meta, bundles, labels = _corpus_bundles(corpus_dir, cfg, action_model_path, fidgets_from)
    result = cross_validate(bundles, labels, cfg.fusion())
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "metrics.json", "w") as f:
        f.write(canonical_json(result.to_dict()))
    inputs = [corpus_dir] + ([action_model_path] if action_model_path else [])
    write_manifest(out / "manifest.json", "evaluate", cfg.to_dict(), inputs)
    _log(f"F1 {result.f1_mean:.3f} ± {result.f1_std:.3f} over {cfg.folds} folds -> {out}/metrics.json")


@main.command()
@corpus_option
@config_option
@click.option("--action-model", "action_model_path", type=click.Path(), default=None)
@click.option("--fidgets-from", type=click.Choice(["model", "truth"]), default="model",
              show_default=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--budget", type=int, default=2000, show_default=True,
              help="Max feature subsets evaluated by the search.")
@handle_errors
def analyze(corpus_dir, config_path, action_model_path, fidgets_from, out_dir, budget):
    """Linear-regression analysis: polarity report and feature-subset search."""
    cfg = _load_config(config_path)
    meta, schema = open_corpus(corpus_dir)
    records = load_records(corpus_dir)
    models = None
    if fidgets_from == "model":
        if not action_model_path or not Path(action_model_path).exists():
            raise ModelError("analyze needs --action-model, or pass --fidgets-from truth")
        models = load_action_models(action_model_path, schema)

    names = None
    rows, labels, participants = [], [], []
    for session in meta.sessions:
        data = detect_session(load_and_preprocess(meta, schema, session), _widths(cfg))
        gvec = body_gesture_features(
            data.seq, window_length=cfg.window_length, quiet_run=cfg.quiet_run,
            threshold=cfg.gesture_threshold,
        )
        if models is not None:
            slice_labels = label_slices(data, models)
        else:
            truth = load_truth(meta.session_dir(session))
            slice_labels = [lab or "STATIC" for lab in truth_slice_labels(data.slices, truth)]
        fidget_means = average_fidget(encode_fidgets(data.timeline, data.slices, slice_labels))
        if names is None:
            names = list(FEATURE_NAMES) + list(fidget_means.keys())
        rows.append(list(gvec.as_array()) + list(fidget_means.values()))
        rec = records[session]
        labels.append(rec.depression if cfg.label == "depression" else rec.anxiety)
        participants.append(session)

    features = np.array(rows)
    labels_arr = np.array(labels)
    lin = linear_classify(features, labels_arr, folds=cfg.folds, seed=cfg.seed,
                          participants=participants)
    report = polarity_report(names, lin.coefficients)
    search = feature_search(features, labels_arr, names, budget=budget, folds=cfg.folds,
                            seed=cfg.seed, participants=participants)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "polarity.txt", "w") as f:
        for line in report.formatted():
            f.write(line + "\n")
    with open(out / "search_log.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["subset", "f1_mean"])
        for subset, f1 in search.log:
            writer.writerow(["|".join(subset), repr(f1)])
    with open(out / "analysis.json", "w") as f:
        f.write(canonical_json({
            "all_features_f1": lin.f1_mean,
            "best_subset": list(search.best_subset),
            "best_f1": search.f1_mean,
            "exhaustive": search.exhaustive,
            "n_evaluated": search.n_evaluated,
        }))
    inputs = [corpus_dir] + ([action_model_path] if action_model_path else [])
    write_manifest(out / "manifest.json", "analyze", cfg.to_dict(), inputs)
    _log(f"all-features F1 {lin.f1_mean:.3f}; best subset F1 {search.f1_mean:.3f} -> {out}")


if __name__ == "__main__":
    main()
