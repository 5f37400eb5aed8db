"""Deterministic synthetic sessions with exact ground truth.

A seated 29-keypoint puppet performs scripted contact events (hand-to-hand,
hand-to-face/arm/leg, leg crossing, leg shaking), each STATIC or oscillating
inside the fidget band. Sidecar tracks are cohort-shifted Gaussian noise.
Everything is a pure function of the script, so identical seeds give
byte-identical corpora and the script is the ground truth.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from fidgetkit.adaptors import LocationTimeline
from fidgetkit.errors import DataError
from fidgetkit.ingest import (
    FeatureTrack,
    PoseSequence,
    SpeakingTrack,
    resample_nearest,
)
from fidgetkit.motion import DYNAMIC, STATIC, TrajectorySlice
from fidgetkit.schema import DEFAULT_N_POINTS, KeypointSchema, default_schema

TORSO_PX = 100.0
JITTER_SIGMA = 0.005 * TORSO_PX  # below detection thresholds

# Rest pose of the puppet (px). Hands hang beside the lap, legs uncrossed.
REST = {
    "neck": (320.0, 200.0),
    "mid_hip": (320.0, 300.0),
    "nose": (320.0, 150.0),
    "l_eye": (310.0, 140.0),
    "r_eye": (330.0, 140.0),
    "l_shoulder": (280.0, 200.0),
    "r_shoulder": (360.0, 200.0),
    "l_elbow": (265.0, 250.0),
    "r_elbow": (375.0, 250.0),
    "l_wrist": (255.0, 295.0),
    "r_wrist": (385.0, 295.0),
    "l_hip": (295.0, 300.0),
    "r_hip": (345.0, 300.0),
    "l_knee": (290.0, 380.0),
    "r_knee": (350.0, 380.0),
    "l_ankle": (290.0, 460.0),
    "r_ankle": (350.0, 460.0),
}

POINT_ORDER = (
    "neck", "mid_hip", "nose", "l_eye", "r_eye",
    "l_shoulder", "r_shoulder", "l_elbow", "r_elbow",
    "l_wrist", "r_wrist", "l_hip", "r_hip",
    "l_knee", "r_knee", "l_ankle", "r_ankle",
)

HAND_OFFSETS = np.array([(0.0, 0.0), (-8.0, 6.0), (0.0, 10.0), (8.0, 6.0), (-5.0, 14.0), (5.0, 14.0)])

# Wrist target during each hand contact.
HAND_TARGETS = {
    ("left", "H2H"): (314.0, 285.0),
    ("right", "H2H"): (326.0, 285.0),
    ("left", "H2F"): (320.0, 144.0),
    ("right", "H2F"): (320.0, 144.0),
    ("left", "H2A"): (380.0, 272.5),  # on the right forearm
    ("right", "H2A"): (260.0, 272.5),  # on the left forearm
    ("left", "H2L"): (292.5, 340.0),
    ("right", "H2L"): (347.5, 340.0),
}
L2L_ANKLE_TARGET = (352.0, 386.0)  # left ankle onto the right leg

HAND_EVENT_CODES = ("H2A", "H2L", "H2F")
LEG_EVENT_CODES = ("L2L", "L2G")

OSCILLATE = "oscillate"
STILL = "still"

#: sidecar cohort mean shifts (dims receiving the shift)
SIDE_SHIFT = 0.8
SHIFT_DIMS = {"aus": 5, "gaze": 2, "mfccs": 3}
MFCC_RATE_HZ = 100.0


@dataclass(frozen=True)
class ScriptEvent:
    """One scripted contact: [start, end) frames on a channel, still or oscillating."""

    channel: str  # left | right | both | legs
    code: str
    start: int
    end: int  # exclusive
    motion: str = STILL
    freq: float = 0.0
    amp: float = 0.0

    def __post_init__(self):
        if self.end <= self.start:
            raise DataError(f"event end {self.end} must exceed start {self.start}")
        if self.channel not in ("left", "right", "both", "legs"):
            raise DataError(f"unknown channel {self.channel!r}")
        if self.channel == "both" and self.code != "H2H":
            raise DataError("channel 'both' only carries H2H")
        if self.channel in ("left", "right") and self.code not in HAND_EVENT_CODES:
            raise DataError(f"hand channels carry {HAND_EVENT_CODES}, got {self.code!r}")
        if self.channel == "legs" and self.code not in LEG_EVENT_CODES:
            raise DataError(f"legs channel carries {LEG_EVENT_CODES}, got {self.code!r}")
        if self.motion not in (OSCILLATE, STILL):
            raise DataError(f"motion must be '{OSCILLATE}' or '{STILL}'")
        if self.motion == OSCILLATE and not 0.5 <= self.freq <= 2.5:
            raise DataError(f"oscillation freq {self.freq} outside the [0.5, 2.5] Hz fidget band")

    @property
    def dynamic(self) -> bool:
        return self.motion == OSCILLATE

    def to_dict(self) -> dict:
        return {
            "channel": self.channel, "code": self.code, "start": self.start, "end": self.end,
            "motion": self.motion, "freq": self.freq, "amp": self.amp,
        }


@dataclass(frozen=True)
class Script:
    """Full recipe for one synthetic session."""

    seed: int
    fps: float
    n_frames: int
    events: tuple[ScriptEvent, ...]
    speaking: tuple[tuple[float, float], ...] = ()  # participant intervals (s)
    phq8: int = 0
    gad7: int = 0
    cohort: str = "low"
    session: str = "S"

    def __post_init__(self):
        occupied = {"left": [], "right": [], "legs": []}
        for ev in self.events:
            channels = ("left", "right") if ev.channel == "both" else (ev.channel,)
            for ch in channels:
                for s, e in occupied[ch]:
                    if ev.start < e and s < ev.end:
                        raise DataError(
                            f"events overlap on channel {ch!r}: [{s},{e}) and [{ev.start},{ev.end})"
                        )
                occupied[ch].append((ev.start, ev.end))
            if ev.end > self.n_frames:
                raise DataError(f"event ends at {ev.end} beyond {self.n_frames} frames")

    def to_json(self) -> str:
        return json.dumps(
            {
                "seed": self.seed, "fps": self.fps, "n_frames": self.n_frames,
                "session": self.session, "cohort": self.cohort,
                "phq8": self.phq8, "gad7": self.gad7,
                "events": [ev.to_dict() for ev in self.events],
                "speaking": [list(iv) for iv in self.speaking],
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "Script":
        raw = json.loads(text)
        events = tuple(ScriptEvent(**ev) for ev in raw["events"])
        return cls(
            seed=raw["seed"], fps=raw["fps"], n_frames=raw["n_frames"],
            events=events, speaking=tuple(tuple(iv) for iv in raw.get("speaking", [])),
            phq8=raw.get("phq8", 0), gad7=raw.get("gad7", 0),
            cohort=raw.get("cohort", "low"), session=raw.get("session", "S"),
        )


@dataclass
class GroundTruth:
    """Exact per-frame codes and the event list behind them."""

    timeline: LocationTimeline
    events: tuple[ScriptEvent, ...]
    cohort: str
    phq8: int
    gad7: int


def _oscillation(ev: ScriptEvent, t: np.ndarray, fps: float) -> np.ndarray:
    """x-offset over the event's frames (starts at 0: no positional jump)."""
    if not ev.dynamic:
        return np.zeros(len(t))
    return ev.amp * TORSO_PX * np.sin(2 * np.pi * ev.freq * (t - ev.start) / fps)


def generate(script: Script, schema: KeypointSchema | None = None):
    """Render a script into (PoseSequence, tracks, SpeakingTrack, GroundTruth)."""
    schema = schema or default_schema()
    seq, (tracks, _), speaking, truth = _generate_with_raw(script, schema)
    return seq, tracks, speaking, truth


def _make_tracks(script: Script, rng: np.random.Generator, n: int, fps: float):
    """Cohort-shifted Gaussian sidecars; MFCCs carry their own sample rate."""
    shift = SIDE_SHIFT if script.cohort == "high" else 0.0
    frame_times = np.arange(n) / fps

    def noisy(dim, n_samples):
        return rng.standard_normal((n_samples, dim))

    aus = noisy(35, n)
    aus[:, : SHIFT_DIMS["aus"]] += shift
    gaze = noisy(8, n)
    gaze[:, : SHIFT_DIMS["gaze"]] += shift
    n_mfcc = int(np.ceil(n / fps * MFCC_RATE_HZ)) + 1
    mfcc_times = np.arange(n_mfcc) / MFCC_RATE_HZ
    mfcc = noisy(13, n_mfcc)
    mfcc[:, : SHIFT_DIMS["mfccs"]] += shift

    tracks = {
        "aus": FeatureTrack(name="aus", values=aus.T),
        "gaze": FeatureTrack(name="gaze", values=gaze.T),
        "mfccs": FeatureTrack(name="mfccs", values=resample_nearest(mfcc_times, mfcc, frame_times)),
    }
    raw = {"aus": (frame_times, aus), "gaze": (frame_times, gaze), "mfccs": (mfcc_times, mfcc)}
    return tracks, raw


TRANSITION_MARGIN = 12  # frames around a positional jump to keep out of training


def _teleport_boundaries(events: tuple[ScriptEvent, ...]) -> dict[str, list[int]]:
    """Frames where a limb jumps position (event start/end, except L2G shakes)."""
    bounds: dict[str, list[int]] = {"left": [], "right": [], "legs": []}
    for ev in events:
        if ev.channel == "legs" and ev.code == "L2G":
            continue  # oscillation ramps from zero: continuous
        channels = ("left", "right") if ev.channel == "both" else (ev.channel,)
        for ch in channels:
            bounds[ch] += [ev.start, ev.end]
    return bounds


def truth_slice_labels(
    slices: list[TrajectorySlice], truth: GroundTruth, margin: int = TRANSITION_MARGIN
) -> list[str | None]:
    """Ground-truth DYNAMIC/STATIC per slice; None marks unusable training slices.

    A slice fully inside one event takes the event's motion; a slice touching
    no event is STATIC; slices that straddle event boundaries or contain a
    positional jump (within ``margin`` frames) are dropped (None).
    """
    bounds = _teleport_boundaries(truth.events)
    labels: list[str | None] = []
    for sl in slices:
        channel = {"both": "left", "left": "left", "right": "right", "legs": "legs"}[sl.channel]
        lo, hi = sl.start, sl.end
        if any(b - margin < hi and lo < b + margin for b in bounds[channel]):
            labels.append(None)
            continue
        chan_events = [
            ev
            for ev in truth.events
            if (ev.channel == sl.channel or (ev.channel == "both" and sl.channel in ("left", "right", "both")))
        ] if sl.channel != "legs" else [ev for ev in truth.events if ev.channel == "legs"]
        inside = [ev for ev in chan_events if ev.start <= lo and hi <= ev.end]
        if inside:
            labels.append(DYNAMIC if inside[0].dynamic else STATIC)
            continue
        overlapping = [ev for ev in chan_events if ev.start < hi and lo < ev.end]
        labels.append(None if overlapping else STATIC)
    return labels


def _alternating_speaking(rng: np.random.Generator, duration_s: float) -> tuple[tuple[float, float], ...]:
    """Conversation turns; returns the participant's intervals."""
    intervals = []
    t = 0.0
    speaker_is_participant = bool(rng.integers(0, 2))
    while t < duration_s:
        length = float(rng.uniform(4.0, 9.0))
        end = min(t + length, duration_s)
        if speaker_is_participant:
            intervals.append((round(t, 3), round(end, 3)))
        speaker_is_participant = not speaker_is_participant
        t = end
    return tuple(intervals)


def make_script(
    session: str,
    cohort: str,
    seed: int,
    fps: float = 26.0,
    duration_s: float = 90.0,
) -> Script:
    """Randomized but deterministic session script for one cohort member.

    The high cohort shakes its legs ~40% of the session, the low cohort ~5%.
    Every session mixes hand contacts, with at least one oscillating and one
    still event per hand channel so the action classifiers see both classes
    in every category.
    """
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * fps))
    events: list[ScriptEvent] = []

    def osc_kwargs(dynamic: bool, lo=0.9, hi=2.0) -> dict:
        if not dynamic:
            return {"motion": STILL, "freq": 0.0, "amp": 0.0}
        return {
            "motion": OSCILLATE,
            "freq": float(np.round(rng.uniform(lo, hi), 3)),
            "amp": 0.05,
        }

    # leg fidgeting budget, then one still crossed-legs stretch
    target = 0.40 if cohort == "high" else 0.05
    budget = int(target * n)
    cursor = int(rng.integers(50, 150))
    while budget > 0 and cursor < n - 260:
        length = int(rng.integers(160, 230)) if cohort == "high" else int(rng.integers(110, 140))
        length = min(length, budget + 60, n - cursor - 110)
        if length < 100:
            break
        events.append(
            ScriptEvent(channel="legs", code="L2G", start=cursor, end=cursor + length,
                        **osc_kwargs(True, 0.8, 2.0))
        )
        budget -= length
        cursor += length + int(rng.integers(130, 240))
    if cursor < n - 160:
        start = cursor + int(rng.integers(10, 40))
        end = min(start + int(rng.integers(140, 200)), n - 5)
        if end - start >= 120:
            events.append(ScriptEvent(channel="legs", code="L2L", start=start, end=end))

    # hand contacts: one H2H plus two events per hand, one dynamic and one still
    hand_plan: list[tuple[str, str, bool]] = [("both", "H2H", bool(rng.integers(0, 2)))]
    for channel in ("left", "right"):
        codes = rng.choice(HAND_EVENT_CODES, size=2, replace=False)
        first_dynamic = bool(rng.integers(0, 2))
        hand_plan.append((channel, str(codes[0]), first_dynamic))
        hand_plan.append((channel, str(codes[1]), not first_dynamic))
    order = rng.permutation(len(hand_plan))

    cursor = int(rng.integers(60, 140))
    for k in order:
        channel, code, dynamic = hand_plan[k]
        length = int(rng.integers(160, 230))
        if cursor + length > n - 10:
            break
        events.append(
            ScriptEvent(channel=channel, code=code, start=cursor, end=cursor + length,
                        **osc_kwargs(dynamic, 0.9, 2.2))
        )
        cursor += length + int(rng.integers(130, 190))

    phq8 = int(rng.integers(10, 17)) if cohort == "high" else int(rng.integers(1, 6))
    gad7 = int(rng.integers(9, 15)) if cohort == "high" else int(rng.integers(1, 5))
    return Script(
        seed=seed, fps=fps, n_frames=n, events=tuple(events),
        speaking=_alternating_speaking(rng, duration_s),
        phq8=phq8, gad7=gad7, cohort=cohort, session=session,
    )


def _fmt(v: float) -> str:
    return repr(float(v))


def _write_csv(path: Path, header: list[str], times: np.ndarray, values: np.ndarray) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for ts, row in zip(times, values):
            writer.writerow([_fmt(ts)] + [_fmt(v) for v in row])


def write_session(out_dir: Path, script: Script, schema: KeypointSchema | None = None) -> GroundTruth:
    """Generate one session and write it in the ingest file formats."""
    schema = schema or default_schema()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seq, (tracks, raw), speaking, truth = _generate_with_raw(script, schema)

    frames = []
    for ti in range(seq.n_frames):
        points = [
            [float(seq.coords[ti, j, 0]), float(seq.coords[ti, j, 1]), float(seq.confidence[ti, j])]
            for j in range(seq.n_points)
        ]
        frames.append({"t": ti, "points": points})
    with open(out_dir / "pose.json", "w") as f:
        json.dump(frames, f, sort_keys=True, separators=(",", ":"))

    for name in ("aus", "gaze", "mfccs"):
        times, values = raw[name]
        header = ["time_s"] + [f"{name}_{i}" for i in range(values.shape[1])]
        _write_csv(out_dir / f"{name}.csv", header, times, values)

    with open(out_dir / "diarization.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["start_s", "end_s", "speaker_id"])
        duration = script.n_frames / script.fps
        cursor = 0.0
        for start, end in script.speaking:
            if start > cursor:
                writer.writerow([_fmt(cursor), _fmt(start), "interviewer"])
            writer.writerow([_fmt(start), _fmt(end), "participant"])
            cursor = end
        if cursor < duration:
            writer.writerow([_fmt(cursor), _fmt(duration), "interviewer"])

    truth_doc = {
        "session": script.session,
        "cohort": script.cohort,
        "phq8": script.phq8,
        "gad7": script.gad7,
        "events": [ev.to_dict() for ev in script.events],
        "location": {
            "left": truth.timeline.left_hand,
            "right": truth.timeline.right_hand,
            "legs": truth.timeline.legs,
        },
    }
    with open(out_dir / "truth.json", "w") as f:
        json.dump(truth_doc, f, sort_keys=True, separators=(",", ":"))
    with open(out_dir / "script.json", "w") as f:
        f.write(script.to_json())
    return truth


def _generate_with_raw(script: Script, schema: KeypointSchema):
    """generate(), but also expose the raw (pre-alignment) sidecar samples."""
    n = script.n_frames
    rng = np.random.default_rng(script.seed)
    t = np.arange(n)

    base = np.zeros((n, DEFAULT_N_POINTS, 2))
    for i, name in enumerate(POINT_ORDER):
        base[:, i, :] = REST[name]
    wrists = {"left": np.tile(REST["l_wrist"], (n, 1)), "right": np.tile(REST["r_wrist"], (n, 1))}
    left_codes = ["HF"] * n
    right_codes = ["HF"] * n
    leg_codes = ["L2G"] * n
    leg_offset = np.zeros(n)
    l_ankle = np.tile(REST["l_ankle"], (n, 1))

    for ev in script.events:
        frames = np.arange(ev.start, ev.end)
        osc = _oscillation(ev, frames, script.fps)
        if ev.channel in ("left", "right", "both"):
            hands = ("left", "right") if ev.channel == "both" else (ev.channel,)
            for hand in hands:
                target = np.array(HAND_TARGETS[(hand, "H2H" if ev.channel == "both" else ev.code)])
                pos = np.tile(target, (len(frames), 1))
                pos[:, 0] += osc
                wrists[hand][frames] = pos
                codes = left_codes if hand == "left" else right_codes
                for f in frames:
                    codes[f] = "H2H" if ev.channel == "both" else ev.code
        elif ev.code == "L2L":
            pos = np.tile(L2L_ANKLE_TARGET, (len(frames), 1))
            pos[:, 0] += osc
            l_ankle[frames] = pos
            for f in frames:
                leg_codes[f] = "L2L"
        else:
            leg_offset[frames] = osc

    coords = base
    coords[:, POINT_ORDER.index("l_wrist"), :] = wrists["left"]
    coords[:, POINT_ORDER.index("r_wrist"), :] = wrists["right"]
    coords[:, POINT_ORDER.index("l_ankle"), :] = l_ankle
    coords[:, POINT_ORDER.index("l_ankle"), 0] += leg_offset
    coords[:, POINT_ORDER.index("r_ankle"), 0] += leg_offset
    for side, wr in (("hand_left", "left"), ("hand_right", "right")):
        for k, idx in enumerate(schema[side]):
            coords[:, idx, :] = wrists[wr] + HAND_OFFSETS[k]

    coords = coords + rng.normal(0.0, JITTER_SIGMA, coords.shape)
    seq = PoseSequence(fps=script.fps, coords=coords, confidence=np.ones((n, DEFAULT_N_POINTS)), schema=schema)

    tracks, raw = _make_tracks(script, rng, n, script.fps)
    speaking = np.zeros(n, dtype=bool)
    frame_times = t / script.fps
    for start, end in script.speaking:
        speaking |= (frame_times >= start) & (frame_times < end)

    truth = GroundTruth(
        timeline=LocationTimeline(left_hand=left_codes, right_hand=right_codes, legs=leg_codes),
        events=script.events,
        cohort=script.cohort,
        phq8=script.phq8,
        gad7=script.gad7,
    )
    return seq, (tracks, raw), SpeakingTrack(speaking=speaking), truth


def make_benchmark(
    out_dir,
    n_participants: int = 12,
    seed: int = 7,
    fps: float = 26.0,
    duration_s: float = 90.0,
) -> list[str]:
    """Write a balanced synthetic corpus in the ingest file formats."""
    if n_participants < 6:
        raise DataError("need at least 6 participants for 3-fold participant-independent CV")
    if n_participants % 2:
        raise DataError("participant count must be even for balanced cohorts")
    out_dir = Path(out_dir)
    (out_dir / "sessions").mkdir(parents=True, exist_ok=True)
    schema = default_schema()

    sessions = []
    labels_rows = []
    for i in range(n_participants):
        session = f"P{i + 1:02d}"
        cohort = "high" if i % 2 == 0 else "low"
        script = make_script(session, cohort, seed=seed * 10_000 + i, fps=fps, duration_s=duration_s)
        write_session(out_dir / "sessions" / session, script, schema)
        labels_rows.append((session, script.phq8, script.gad7))
        sessions.append(session)

    with open(out_dir / "schema.json", "w") as f:
        f.write(schema.to_json())
    with open(out_dir / "corpus.json", "w") as f:
        json.dump(
            {
                "fps": fps, "n_participants": n_participants, "seed": seed,
                "duration_s": duration_s, "participant_speaker": "participant",
                "format_version": 1,
            },
            f, sort_keys=True, separators=(",", ":"),
        )
    with open(out_dir / "labels.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["session", "phq8", "gad7"])
        for row in labels_rows:
            writer.writerow(row)
    return sessions
