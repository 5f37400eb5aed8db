"""Fidgeting activations: location codes combined with DYNAMIC action labels.

A fidget row fires at frame t when the frame's location code matches the
row's combination and t lies under a DYNAMIC slice. Overlapping slices are
resolved by nearest slice center (ties favor DYNAMIC); event tails past the
last full window inherit the last slice's label.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fidgetkit.adaptors import LocationTimeline, runs
from fidgetkit.errors import DataError
from fidgetkit.ingest import SpeakingTrack
from fidgetkit.motion import DYNAMIC, TrajectorySlice

FIDGET_ROWS = (
    "CHF",
    "SHF-L(left)",
    "SHF-L(right)",
    "SHF-A(left)",
    "SHF-A(right)",
    "SHF-F(left)",
    "SHF-F(right)",
    "LFF",
)

SPEAKING_ROW = "speaking"

#: location code behind each single-hand fidget row
_SHF_CODE = {"SHF-L": "H2L", "SHF-A": "H2A", "SHF-F": "H2F"}


@dataclass(frozen=True)
class FidgetMatrix:
    """Binary activation matrix, one named row per fidget type (x N frames)."""

    rows: np.ndarray
    row_names: tuple[str, ...]

    def __post_init__(self):
        if self.rows.shape[0] != len(self.row_names):
            raise DataError("row count must match row names")
        if self.row_names[: len(FIDGET_ROWS)] != FIDGET_ROWS:
            raise DataError(f"rows must start with the fixed order {FIDGET_ROWS}")
        if not np.isin(self.rows, (0, 1)).all():
            raise DataError("fidget rows must be binary")

    @property
    def n_frames(self) -> int:
        return self.rows.shape[1]

    @property
    def has_speaking(self) -> bool:
        return SPEAKING_ROW in self.row_names

    def row(self, name: str) -> np.ndarray:
        return self.rows[self.row_names.index(name)]

    def without_speaking(self) -> "FidgetMatrix":
        return FidgetMatrix(rows=self.rows[: len(FIDGET_ROWS)].copy(), row_names=FIDGET_ROWS)


def _stream_of(sl: TrajectorySlice) -> str:
    return {"BOTH": "both", "LEFT": "left", "RIGHT": "right", "LEG": "legs"}[sl.category]


def _run_dynamic_mask(
    run_start: int, run_end: int, run_slices: list[tuple[TrajectorySlice, str]], out: np.ndarray
) -> None:
    """Fill out[run_start..run_end] with the resolved per-frame DYNAMIC flag."""
    if not run_slices:
        return  # no full window fits: rows stay 0
    run_slices = sorted(run_slices, key=lambda p: p[0].start)
    last_end = run_slices[-1][0].end
    for t in range(run_start, run_end + 1):
        covering = [(s, lab) for s, lab in run_slices if s.start <= t < s.end]
        if covering:
            best = min(abs(t - s.center) for s, _ in covering)
            candidates = [lab for s, lab in covering if abs(t - s.center) == best]
            label = DYNAMIC if DYNAMIC in candidates else candidates[0]
        elif t >= last_end:
            label = run_slices[-1][1]
        else:
            continue  # gap before first slice cannot happen (windows anchor at run start)
        out[t] = label == DYNAMIC


def _dynamic_masks(
    timeline: LocationTimeline, slices: list[TrajectorySlice], labels: list[str]
) -> dict[str, np.ndarray]:
    n = timeline.n_frames
    masks = {k: np.zeros(n, dtype=bool) for k in ("both", "left", "right", "legs")}
    by_stream: dict[str, list[tuple[TrajectorySlice, str]]] = {k: [] for k in masks}
    for sl, lab in zip(slices, labels):
        by_stream[_stream_of(sl)].append((sl, lab))

    def fill(channel: str, stream_for_code, mask_key_for_code) -> None:
        for start, end, code in runs(timeline.channel(channel)):
            stream = stream_for_code(code)
            if stream is None:
                continue
            run_slices = [
                (s, lab)
                for s, lab in by_stream[stream]
                if s.code == code and start <= s.start and s.end <= end + 1
            ]
            _run_dynamic_mask(start, end, run_slices, masks[mask_key_for_code(code)])

    fill("left", lambda c: "both" if c == "H2H" else "left", lambda c: "both" if c == "H2H" else "left")
    fill("right", lambda c: None if c == "H2H" else "right", lambda c: "right")
    fill("legs", lambda c: "legs", lambda c: "legs")
    return masks


def encode_fidgets(
    timeline: LocationTimeline, slices: list[TrajectorySlice], labels: list[str]
) -> FidgetMatrix:
    """Build the 8-row fidget matrix from location codes and slice action labels."""
    if len(slices) != len(labels):
        raise DataError("slices and labels must align")
    n = timeline.n_frames
    masks = _dynamic_masks(timeline, slices, labels)

    left = np.array(timeline.left_hand)
    right = np.array(timeline.right_hand)

    rows = np.zeros((len(FIDGET_ROWS), n), dtype=np.uint8)
    rows[FIDGET_ROWS.index("CHF")] = (left == "H2H") & masks["both"]
    for prefix, code in _SHF_CODE.items():
        rows[FIDGET_ROWS.index(f"{prefix}(left)")] = (left == code) & masks["left"]
        rows[FIDGET_ROWS.index(f"{prefix}(right)")] = (right == code) & masks["right"]
    rows[FIDGET_ROWS.index("LFF")] = masks["legs"]  # legs codes are always L2G or L2L
    return FidgetMatrix(rows=rows, row_names=FIDGET_ROWS)


def attach_speaking(matrix: FidgetMatrix, speaking: SpeakingTrack) -> FidgetMatrix:
    """Append the participant-speaking flag as a 9th row."""
    if matrix.has_speaking:
        raise DataError("matrix already carries a speaking row")
    if speaking.n_frames != matrix.n_frames:
        raise DataError(
            f"speaking track has {speaking.n_frames} frames, matrix has {matrix.n_frames}"
        )
    rows = np.vstack([matrix.rows, speaking.speaking.astype(np.uint8)[None, :]])
    return FidgetMatrix(rows=rows, row_names=FIDGET_ROWS + (SPEAKING_ROW,))
