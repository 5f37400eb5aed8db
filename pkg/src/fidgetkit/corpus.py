"""Reading synthetic (or equivalently formatted) corpora from disk."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

from fidgetkit.adaptors import LocationTimeline
from fidgetkit.errors import DataError
from fidgetkit.fusion import ParticipantRecord
from fidgetkit.schema import KeypointSchema
from fidgetkit.synth import GroundTruth, ScriptEvent

SESSION_FILES = ("pose.json", "aus.csv", "gaze.csv", "mfccs.csv", "diarization.csv")


@dataclass(frozen=True)
class CorpusMeta:
    root: Path
    fps: float
    participant_speaker: str
    sessions: tuple[str, ...]

    def session_dir(self, session: str) -> Path:
        return self.root / "sessions" / session

    def sidecar_paths(self, session: str) -> dict[str, Path]:
        d = self.session_dir(session)
        return {
            "aus": d / "aus.csv",
            "gaze": d / "gaze.csv",
            "mfccs": d / "mfccs.csv",
            "diarization": d / "diarization.csv",
        }


def open_corpus(root) -> tuple[CorpusMeta, KeypointSchema]:
    root = Path(root)
    meta_path = root / "corpus.json"
    if not meta_path.exists():
        raise DataError(f"{root}: not a corpus (missing corpus.json)")
    with open(meta_path) as f:
        meta = json.load(f)
    schema = KeypointSchema.from_file(root / "schema.json")
    sessions_dir = root / "sessions"
    if not sessions_dir.is_dir():
        raise DataError(f"{root}: missing sessions/ directory")
    sessions = tuple(sorted(p.name for p in sessions_dir.iterdir() if p.is_dir()))
    if not sessions:
        raise DataError(f"{root}: no sessions found")
    return (
        CorpusMeta(
            root=root,
            fps=float(meta["fps"]),
            participant_speaker=str(meta.get("participant_speaker", "participant")),
            sessions=sessions,
        ),
        schema,
    )


def load_records(root) -> dict[str, ParticipantRecord]:
    path = Path(root) / "labels.csv"
    if not path.exists():
        raise DataError(f"{path}: labels file missing")
    records = {}
    with open(path) as f:
        reader = csv.DictReader(f)
        for lineno, row in enumerate(reader, start=2):
            try:
                rec = ParticipantRecord(
                    session=row["session"], phq8=float(row["phq8"]), gad7=float(row["gad7"])
                )
            except (KeyError, ValueError) as e:
                raise DataError(f"{path}: line {lineno}: {e}") from e
            records[rec.session] = rec
    return records


def load_truth(session_dir) -> GroundTruth:
    path = Path(session_dir) / "truth.json"
    if not path.exists():
        raise DataError(f"{path}: ground truth missing (not a synthetic session?)")
    with open(path) as f:
        doc = json.load(f)
    events = tuple(ScriptEvent(**ev) for ev in doc["events"])
    loc = doc["location"]
    return GroundTruth(
        timeline=LocationTimeline(left_hand=loc["left"], right_hand=loc["right"], legs=loc["legs"]),
        events=events,
        cohort=doc["cohort"],
        phq8=doc["phq8"],
        gad7=doc["gad7"],
    )
