"""Shared fixtures: pose builders and a session-scoped synthetic corpus."""

import numpy as np
import pytest

from fidgetkit.schema import DEFAULT_N_POINTS, default_schema
from fidgetkit.ingest import PoseSequence


@pytest.fixture
def schema():
    return default_schema()


def build_sequence(coords, fps=26.0, confidence=None, schema=None):
    coords = np.asarray(coords, dtype=float)
    if confidence is None:
        confidence = np.ones(coords.shape[:2])
    return PoseSequence(
        fps=fps, coords=coords, confidence=confidence, schema=schema or default_schema()
    )


def constant_pose(n_frames=200, fps=26.0):
    """A fully observed, motionless, schema-complete sequence."""
    from fidgetkit.synth import REST, POINT_ORDER, HAND_OFFSETS

    coords = np.zeros((n_frames, DEFAULT_N_POINTS, 2))
    for i, name in enumerate(POINT_ORDER):
        coords[:, i, :] = REST[name]
    sch = default_schema()
    for side, wrist in (("hand_left", "l_wrist"), ("hand_right", "r_wrist")):
        for k, idx in enumerate(sch[side]):
            coords[:, idx, :] = np.array(REST[wrist]) + HAND_OFFSETS[k]
    return build_sequence(coords, fps=fps, schema=sch)


@pytest.fixture
def still_sequence():
    return constant_pose()


@pytest.fixture(scope="session")
def corpus12(tmp_path_factory):
    """The n=12 fixed-seed benchmark corpus written to disk once per session."""
    from fidgetkit.synth import make_benchmark

    root = tmp_path_factory.mktemp("corpus") / "bench"
    make_benchmark(root, n_participants=12, seed=7)
    return root


@pytest.fixture(scope="session")
def action_model12(tmp_path_factory, corpus12):
    """Action classifiers trained on corpus12 ground truth, saved to disk."""
    from fidgetkit.adaptors import detect_locations
    from fidgetkit.corpus import load_truth, open_corpus
    from fidgetkit.motion import save_action_models, slice_sessions, train_action_classifier
    from fidgetkit.pipeline import load_and_preprocess
    from fidgetkit.synth import truth_slice_labels

    meta, schema = open_corpus(corpus12)
    slices, labels = [], []
    for session in meta.sessions:
        data = load_and_preprocess(meta, schema, session)
        timeline = detect_locations(data.seq)
        s = slice_sessions(data.seq, timeline, session)
        truth = load_truth(meta.session_dir(session))
        for sl, lab in zip(s, truth_slice_labels(s, truth)):
            if lab is not None:
                slices.append(sl)
                labels.append(lab)
    models, report = train_action_classifier(slices, labels, meta.fps, seed=0)
    path = tmp_path_factory.mktemp("models") / "actions.pkl"
    save_action_models(models, path, schema, meta.fps)
    return {"path": path, "models": models, "report": report}
