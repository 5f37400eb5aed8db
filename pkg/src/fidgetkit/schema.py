"""Keypoint schema: named index groups over the pose keypoint array."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from fidgetkit.errors import DataError

# Groups that name a two-joint segment (used for oriented limb boxes).
SEGMENT_GROUPS = (
    "forearm_left",
    "forearm_right",
    "upper_arm_left",
    "upper_arm_right",
    "upper_leg_left",
    "upper_leg_right",
    "lower_leg_left",
    "lower_leg_right",
)

REQUIRED_GROUPS = (
    "neck",
    "mid_hip",
    "head",
    "face",
    "hand_left",
    "hand_right",
) + SEGMENT_GROUPS


@dataclass(frozen=True)
class KeypointSchema:
    """Maps semantic body-part names to keypoint indices.

    ``groups`` must contain every name in ``REQUIRED_GROUPS``. Segment groups
    hold exactly two joint indices (proximal, distal); ``neck`` and ``mid_hip``
    hold a single torso anchor each.
    """

    groups: dict[str, list[int]] = field(default_factory=dict)

    def __post_init__(self):
        missing = [g for g in REQUIRED_GROUPS if g not in self.groups]
        if missing:
            raise DataError(f"schema missing groups: {missing}")
        for g in SEGMENT_GROUPS:
            if len(self.groups[g]) != 2:
                raise DataError(f"segment group {g!r} must have exactly 2 joints")
        for g in ("neck", "mid_hip"):
            if len(self.groups[g]) != 1:
                raise DataError(f"anchor group {g!r} must have exactly 1 index")
        overlap = set(self.groups["hand_left"]) & set(self.groups["hand_right"])
        if overlap:
            raise DataError(f"hand_left and hand_right share indices: {sorted(overlap)}")

    def __getitem__(self, name: str) -> list[int]:
        return self.groups[name]

    @property
    def neck(self) -> int:
        return self.groups["neck"][0]

    @property
    def mid_hip(self) -> int:
        return self.groups["mid_hip"][0]

    @property
    def hands(self) -> list[int]:
        return sorted(self.groups["hand_left"] + self.groups["hand_right"])

    @property
    def legs(self) -> list[int]:
        idx: set[int] = set()
        for g in ("upper_leg_left", "upper_leg_right", "lower_leg_left", "lower_leg_right"):
            idx.update(self.groups[g])
        return sorted(idx)

    def localization(self, name: str) -> list[int]:
        """Indices for a movement localization: O, Hn, He, or L."""
        if name == "Hn":
            return self.hands
        if name == "He":
            return sorted(self.groups["head"])
        if name == "L":
            return self.legs
        raise KeyError(f"unknown localization {name!r} (overall 'O' needs the keypoint count)")

    def max_index(self) -> int:
        return max(i for idx in self.groups.values() for i in idx)

    def validate_point_count(self, n_points: int) -> None:
        if self.max_index() >= n_points:
            raise DataError(
                f"schema references index {self.max_index()} but pose has {n_points} keypoints"
            )

    def to_json(self) -> str:
        return json.dumps(self.groups, sort_keys=True)

    @classmethod
    def from_file(cls, path) -> "KeypointSchema":
        try:
            with open(path) as f:
                raw = json.load(f)
        except json.JSONDecodeError as e:
            raise DataError(f"schema file {path}: invalid JSON at line {e.lineno}: {e.msg}") from e
        if not isinstance(raw, dict):
            raise DataError(f"schema file {path}: expected a JSON object of group -> indices")
        groups = {}
        for name, idx in raw.items():
            if not isinstance(idx, list) or not all(isinstance(i, int) for i in idx):
                raise DataError(f"schema file {path}: group {name!r} must be a list of ints")
            groups[name] = idx
        return cls(groups)


# 29-keypoint layout used by the synthetic generator and the tests:
# torso anchors, a coarse head, arm/leg joints, and 6-point hand blobs.
DEFAULT_GROUPS = {
    "neck": [0],
    "mid_hip": [1],
    "head": [2, 3, 4],
    "face": [2, 3, 4],
    "hand_left": [17, 18, 19, 20, 21, 22],
    "hand_right": [23, 24, 25, 26, 27, 28],
    "forearm_left": [7, 9],
    "forearm_right": [8, 10],
    "upper_arm_left": [5, 7],
    "upper_arm_right": [6, 8],
    "upper_leg_left": [11, 13],
    "upper_leg_right": [12, 14],
    "lower_leg_left": [13, 15],
    "lower_leg_right": [14, 16],
}

DEFAULT_N_POINTS = 29


def default_schema() -> KeypointSchema:
    return KeypointSchema({k: list(v) for k, v in DEFAULT_GROUPS.items()})
