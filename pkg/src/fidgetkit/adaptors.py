"""Per-frame self-adaptor location detection from limb bounding boxes.

Hands and face get the smallest axis-aligned box over their keypoints;
arm and leg segments get oriented boxes spanning joint to joint. H2H wins
first; other hand contacts follow the priority face > arm > leg; contact
runs shorter than the minimum duration are relabeled hand-free (H2F runs
are exempt).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from fidgetkit.errors import DataError
from fidgetkit.geometry import LimbBox, boxes_overlap
from fidgetkit.ingest import PoseSequence

HAND_CODES = ("H2H", "H2A", "H2L", "H2F", "HF")
LEG_CODES = ("L2G", "L2L")

REFERENCE_FPS = 26.0
DEFAULT_MIN_DURATION = 100  # frames at 26 fps


@dataclass(frozen=True)
class BoxWidths:
    """Width multipliers for segment boxes, relative to the mean hand-box diagonal."""

    arm_scale: float = 0.5
    leg_scale: float = 1.0


@dataclass(frozen=True)
class LocationTimeline:
    """Per-frame self-adaptor codes for both hands and the legs."""

    left_hand: list[str]
    right_hand: list[str]
    legs: list[str]

    def __post_init__(self):
        n = len(self.left_hand)
        if len(self.right_hand) != n or len(self.legs) != n:
            raise DataError("timeline channels must have equal length")

    @property
    def n_frames(self) -> int:
        return len(self.left_hand)

    def channel(self, name: str) -> list[str]:
        return {"left": self.left_hand, "right": self.right_hand, "legs": self.legs}[name]


@dataclass
class FrameBoxes:
    """All limb boxes for one frame."""

    boxes: dict[str, LimbBox] = field(default_factory=dict)

    def __getitem__(self, name: str) -> LimbBox:
        return self.boxes[name]


def limb_boxes(coords: np.ndarray, schema, widths: BoxWidths = BoxWidths()) -> FrameBoxes:
    """Construct hand/face/arm/leg boxes for one frame of (P, 2) coordinates."""
    if np.isnan(coords).any():
        raise DataError("limb boxes require fully observed coordinates")
    out = {}
    for name in ("hand_left", "hand_right", "face"):
        out[name] = LimbBox.from_points(coords[schema[name]])

    diag = np.mean([
        2.0 * np.hypot(out[h].half_length, out[h].half_width)
        for h in ("hand_left", "hand_right")
    ])
    arm_w = widths.arm_scale * diag
    leg_w = widths.leg_scale * diag
    for name in ("forearm_left", "forearm_right", "upper_arm_left", "upper_arm_right"):
        a, b = schema[name]
        out[name] = LimbBox.from_segment(coords[a], coords[b], arm_w)
    for name in ("upper_leg_left", "upper_leg_right", "lower_leg_left", "lower_leg_right"):
        a, b = schema[name]
        out[name] = LimbBox.from_segment(coords[a], coords[b], leg_w)
    return FrameBoxes(boxes=out)


def _hand_code(hand: str, boxes: FrameBoxes) -> str:
    """Label one hand by its first overlapping target: face > arm > leg > free.

    Only the contralateral arm counts (a hand always rides its own forearm).
    """
    hb = boxes[f"hand_{hand}"]
    if boxes_overlap(hb, boxes["face"]):
        return "H2F"
    other = "right" if hand == "left" else "left"
    for seg in (f"forearm_{other}", f"upper_arm_{other}"):
        if boxes_overlap(hb, boxes[seg]):
            return "H2A"
    for seg in ("upper_leg_left", "upper_leg_right", "lower_leg_left", "lower_leg_right"):
        if boxes_overlap(hb, boxes[seg]):
            return "H2L"
    return "HF"


def _legs_code(boxes: FrameBoxes) -> str:
    """L2L when a lower leg crosses any box of the other leg, else L2G.

    Thigh-vs-thigh overlap is ignored: adjacent thighs meet at the hips and
    would register as permanently crossed.
    """
    left_lower = boxes["lower_leg_left"]
    right_lower = boxes["lower_leg_right"]
    for other in ("upper_leg_right", "lower_leg_right"):
        if boxes_overlap(left_lower, boxes[other]):
            return "L2L"
    if boxes_overlap(right_lower, boxes["upper_leg_left"]):
        return "L2L"
    return "L2G"


def runs(codes: list[str]) -> list[tuple[int, int, str]]:
    """Run-length encode a code sequence into (start, end_inclusive, code)."""
    out = []
    start = 0
    for i in range(1, len(codes) + 1):
        if i == len(codes) or codes[i] != codes[start]:
            out.append((start, i - 1, codes[start]))
            start = i
    return out


def _filter_short_runs(codes: list[str], min_duration: int) -> list[str]:
    """Relabel contact runs (H2H/H2A/H2L) shorter than min_duration as HF."""
    out = list(codes)
    for start, end, code in runs(codes):
        if code in ("H2H", "H2A", "H2L") and (end - start + 1) < min_duration:
            for i in range(start, end + 1):
                out[i] = "HF"
    return out


def scaled_min_duration(fps: float, min_duration: int = DEFAULT_MIN_DURATION) -> int:
    """Scale the 100-frame default (defined at 26 fps) to the session frame rate."""
    return max(1, round(min_duration * fps / REFERENCE_FPS))


def detect_locations(
    seq: PoseSequence,
    widths: BoxWidths = BoxWidths(),
    min_duration: int | None = None,
) -> LocationTimeline:
    """Detect per-frame location codes over a preprocessed sequence."""
    if min_duration is None:
        min_duration = scaled_min_duration(seq.fps)

    left, right, legs = [], [], []
    for t in range(seq.n_frames):
        boxes = limb_boxes(seq.coords[t], seq.schema, widths)
        if boxes_overlap(boxes["hand_left"], boxes["hand_right"]):
            left.append("H2H")
            right.append("H2H")
        else:
            left.append(_hand_code("left", boxes))
            right.append(_hand_code("right", boxes))
        legs.append(_legs_code(boxes))

    left = _filter_short_runs(left, min_duration)
    right = _filter_short_runs(right, min_duration)
    return LocationTimeline(left_hand=left, right_hand=right, legs=legs)
