"""Session-level orchestration: files -> detection -> fidget matrix -> bundles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fidgetkit.adaptors import BoxWidths, LocationTimeline, detect_locations
from fidgetkit.corpus import CorpusMeta, load_truth
from fidgetkit.errors import ModelError
from fidgetkit.fidgets import FidgetMatrix, attach_speaking, encode_fidgets
from fidgetkit.fusion import FrameBundle
from fidgetkit.ingest import (
    FeatureTrack,
    PoseSequence,
    SpeakingTrack,
    load_session,
    preprocess,
)
from fidgetkit.motion import (
    ActionClassifier,
    TrajectorySlice,
    classify_slice,
    slice_features,
    slice_sessions,
)
from fidgetkit.schema import KeypointSchema


@dataclass
class SessionData:
    """Everything derived from one session's files."""

    session: str
    seq: PoseSequence
    tracks: dict[str, FeatureTrack]
    speaking: SpeakingTrack
    timeline: LocationTimeline | None = None
    slices: list[TrajectorySlice] | None = None


def load_and_preprocess(
    meta: CorpusMeta, schema: KeypointSchema, session: str
) -> SessionData:
    seq, tracks, speaking = load_session(
        meta.session_dir(session) / "pose.json",
        meta.sidecar_paths(session),
        schema,
        fps=meta.fps,
        participant_speaker=meta.participant_speaker,
    )
    return SessionData(
        session=session, seq=preprocess(seq), tracks=tracks, speaking=speaking
    )


def detect_session(data: SessionData, widths: BoxWidths = BoxWidths()) -> SessionData:
    data.timeline = detect_locations(data.seq, widths)
    data.slices = slice_sessions(data.seq, data.timeline, session=data.session)
    return data


def label_slices(
    data: SessionData, models: dict[str, ActionClassifier]
) -> list[str]:
    """Run the per-category action classifiers over the session's slices."""
    labels = []
    for sl in data.slices:
        model = models.get(sl.category)
        if model is None:
            raise ModelError(f"no action classifier for category {sl.category}")
        labels.append(classify_slice(model, slice_features(sl, data.seq.fps)))
    return labels


def fidget_matrix_from_truth(data: SessionData, truth_labels: list[str]) -> FidgetMatrix:
    return encode_fidgets(data.timeline, data.slices, truth_labels)


def build_fidget_matrix(
    data: SessionData,
    models: dict[str, ActionClassifier],
    with_speaking: bool = True,
) -> FidgetMatrix:
    matrix = encode_fidgets(data.timeline, data.slices, label_slices(data, models))
    if with_speaking:
        matrix = attach_speaking(matrix, data.speaking)
    return matrix


def build_bundle(
    data: SessionData,
    matrix: FidgetMatrix,
    groups: tuple[str, ...] = ("fidget", "gaze", "aus", "mfccs"),
) -> FrameBundle:
    """Assemble the per-frame feature groups for the fusion stack."""
    available: dict[str, np.ndarray] = {
        "fidget": matrix.rows.astype(float),
        "fidget_pure": matrix.without_speaking().rows.astype(float),
    }
    for name, track in data.tracks.items():
        available[name] = track.values
    missing = [g for g in groups if g not in available]
    if missing:
        raise ModelError(f"session {data.session}: missing feature groups {missing}")
    return FrameBundle(session=data.session, groups={g: available[g] for g in groups})


def session_truth(meta: CorpusMeta, session: str):
    return load_truth(meta.session_dir(session))
