"""Generic statistical body-gesture features.

A gesture is a period of sustained movement within a localization (overall,
hands, head, legs), detected by thresholding non-overlapping windowed means
of per-frame movement. The 20-value descriptor aggregates movement and
gesture statistics, normalized so session length does not matter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fidgetkit.errors import DataError
from fidgetkit.ingest import PoseSequence

LOCALIZATIONS = ("O", "Hn", "He", "L")
OVERALL_FEATURES = ("FM", "GM", "GS", "GD", "GN")
LOCAL_FEATURES = ("GL", "GA", "GT", "GS", "GN")

#: Header order of the 20-value descriptor, e.g. O-FM ... L-GN.
FEATURE_NAMES = tuple(f"O-{f}" for f in OVERALL_FEATURES) + tuple(
    f"{loc}-{f}" for loc in ("Hn", "He", "L") for f in LOCAL_FEATURES
)


@dataclass(frozen=True)
class MovementSeries:
    """Mean per-frame movement of a localization; entry t is motion from frame t to t+1."""

    localization: str
    values: np.ndarray


@dataclass(frozen=True)
class GestureInterval:
    """Inclusive window-index span of one detected gesture."""

    start_window: int
    end_window: int
    localization: str

    def __post_init__(self):
        if self.end_window < self.start_window:
            raise ValueError("gesture end before start")

    @property
    def n_windows(self) -> int:
        return self.end_window - self.start_window + 1


@dataclass(frozen=True)
class GestureFeatureVector:
    """The 20 named gesture statistics in FEATURE_NAMES order."""

    values: dict[str, float]

    def __post_init__(self):
        if tuple(self.values.keys()) != FEATURE_NAMES:
            raise ValueError("feature vector must carry exactly the 20 named features, in order")

    def as_array(self) -> np.ndarray:
        return np.array([self.values[k] for k in FEATURE_NAMES])

    def __getitem__(self, key: str) -> float:
        return self.values[key]


def frame_movement(seq: PoseSequence, localization: str) -> MovementSeries:
    """Average L2 displacement per frame over the localization's keypoints."""
    if localization == "O":
        idx = list(range(seq.n_points))
    else:
        idx = seq.schema.localization(localization)
    if not idx:
        raise DataError(f"localization {localization!r} has no keypoints")
    pts = seq.coords[:, idx, :]
    disp = np.linalg.norm(np.diff(pts, axis=0), axis=2)
    return MovementSeries(localization=localization, values=disp.mean(axis=1))


def window_movement(movement: np.ndarray, window_length: int = 10) -> np.ndarray:
    """Mean movement over consecutive non-overlapping windows (trailing partial dropped)."""
    n_windows = len(movement) // window_length
    if n_windows == 0:
        raise DataError(
            f"movement series of length {len(movement)} shorter than window {window_length}"
        )
    return movement[: n_windows * window_length].reshape(n_windows, window_length).mean(axis=1)


def detect_gestures(
    windows: np.ndarray, threshold: float, quiet_run: int = 3, localization: str = "O"
) -> list[GestureInterval]:
    """Scan windowed movement for gestures.

    A gesture opens at the first window above ``threshold`` and closes once
    ``quiet_run`` consecutive windows fall to or below it; the quiet run (and
    any trailing quiet windows at the end of data) is not part of the gesture.
    """
    if threshold <= 0:
        raise DataError(f"threshold must be positive, got {threshold}")
    gestures: list[GestureInterval] = []
    open_start = None
    last_active = None
    quiet = 0
    for i, w in enumerate(windows):
        active = w > threshold
        if open_start is None:
            if active:
                open_start = i
                last_active = i
                quiet = 0
        else:
            if active:
                last_active = i
                quiet = 0
            else:
                quiet += 1
                if quiet >= quiet_run:
                    gestures.append(GestureInterval(open_start, last_active, localization))
                    open_start = None
                    quiet = 0
    if open_start is not None:
        gestures.append(GestureInterval(open_start, last_active, localization))
    return gestures


def default_threshold(windows: np.ndarray, percentile: float = 75.0) -> float:
    """Session-adaptive movement threshold: a percentile of the windowed means."""
    return float(np.percentile(windows, percentile))


def _gesture_frame_mask(gestures: list[GestureInterval], n_windows: int, window_length: int) -> np.ndarray:
    mask = np.zeros(n_windows * window_length, dtype=bool)
    for g in gestures:
        mask[g.start_window * window_length : (g.end_window + 1) * window_length] = True
    return mask


def body_gesture_features(
    seq: PoseSequence,
    window_length: int = 10,
    quiet_run: int = 3,
    threshold: float | None = None,
    threshold_percentile: float = 75.0,
) -> GestureFeatureVector:
    """Compute the 20-value descriptor of a preprocessed sequence.

    Sum-type features (gesture length, count, total movement) are divided by
    the frame count; per-gesture averages by the gesture count. Gesture
    surprise is the gesture-free frame fraction divided by the gesture count;
    a localization with no gestures reports surprise 1.0 and zero averages.
    ``threshold`` fixes an absolute movement threshold; by default each
    localization adapts to its own ``threshold_percentile`` of windowed means.
    """
    n_frames = seq.n_frames
    series = {loc: frame_movement(seq, loc) for loc in LOCALIZATIONS}
    windows = {loc: window_movement(series[loc].values, window_length) for loc in LOCALIZATIONS}

    per_loc_gestures: dict[str, list[GestureInterval]] = {}
    for loc in ("Hn", "He", "L"):
        w = windows[loc]
        thr = threshold if threshold is not None else default_threshold(w, threshold_percentile)
        if thr <= 0:
            per_loc_gestures[loc] = []
        else:
            per_loc_gestures[loc] = detect_gestures(w, thr, quiet_run, loc)

    out: dict[str, float] = {}
    n_windows = len(windows["O"])
    f_overall = series["O"].values

    all_gestures = [g for loc in ("Hn", "He", "L") for g in per_loc_gestures[loc]]
    union_mask = np.zeros(n_frames - 1, dtype=bool)
    for loc in ("Hn", "He", "L"):
        m = _gesture_frame_mask(per_loc_gestures[loc], n_windows, window_length)
        union_mask[: len(m)] |= m

    total_movement = float(f_overall.sum())
    gesture_movement = float(f_overall[union_mask].sum())
    gesture_frames = int(union_mask.sum())
    n_gestures = len(all_gestures)

    out["O-FM"] = float(f_overall.mean())
    out["O-GM"] = gesture_movement / total_movement if total_movement > 0 else 0.0
    out["O-GS"] = (n_frames - gesture_frames) / (n_frames * n_gestures) if n_gestures else 1.0
    if n_gestures:
        stds = []
        for g in all_gestures:
            f_loc = series[g.localization].values
            lo = g.start_window * window_length
            hi = (g.end_window + 1) * window_length
            stds.append(float(np.std(f_loc[lo:hi])))
        out["O-GD"] = float(np.mean(stds))
    else:
        out["O-GD"] = 0.0
    out["O-GN"] = n_gestures / n_frames

    for loc in ("Hn", "He", "L"):
        gs = per_loc_gestures[loc]
        f_loc = series[loc].values
        mask = _gesture_frame_mask(gs, n_windows, window_length)
        in_gesture = int(mask.sum())
        moved = float(f_loc[: len(mask)][mask].sum())
        g_count = len(gs)
        out[f"{loc}-GL"] = in_gesture / n_frames
        out[f"{loc}-GA"] = moved / in_gesture if in_gesture else 0.0
        out[f"{loc}-GT"] = moved / n_frames
        out[f"{loc}-GS"] = (n_frames - in_gesture) / (n_frames * g_count) if g_count else 1.0
        out[f"{loc}-GN"] = g_count / n_frames

    ordered = {k: out[k] for k in FEATURE_NAMES}
    return GestureFeatureVector(values=ordered)
