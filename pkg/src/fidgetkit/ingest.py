"""Loading, gap-filling, smoothing, and alignment of pose and sidecar tracks.

Missing keypoints (absent coordinates or confidence 0) are carried as NaN and
filled by cubic-spline interpolation over the observed frames; sequences are
then Savitzky-Golay smoothed and scale-normalized by the session-median
neck-to-mid-hip distance.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.signal import savgol_filter

from fidgetkit.errors import DataError
from fidgetkit.schema import KeypointSchema

# Expected sidecar dimensionalities (feature-group table).
TRACK_DIMS = {"aus": 35, "gaze": 8, "mfccs": 13}


@dataclass(frozen=True)
class PoseSequence:
    """Per-frame 2-D keypoints with confidence.

    coords has shape (N, P, 2); confidence has shape (N, P) with values in
    [0, 1]. Missing coordinates are NaN until interpolation.
    """

    fps: float
    coords: np.ndarray
    confidence: np.ndarray
    schema: KeypointSchema

    def __post_init__(self):
        if self.fps <= 0:
            raise DataError(f"fps must be positive, got {self.fps}")
        if self.coords.ndim != 3 or self.coords.shape[2] != 2:
            raise DataError(f"coords must have shape (N, P, 2), got {self.coords.shape}")
        if self.confidence.shape != self.coords.shape[:2]:
            raise DataError("confidence shape must match coords (N, P)")
        self.schema.validate_point_count(self.n_points)

    @property
    def n_frames(self) -> int:
        return self.coords.shape[0]

    @property
    def n_points(self) -> int:
        return self.coords.shape[1]

    def has_missing(self) -> bool:
        return bool(np.isnan(self.coords).any())


@dataclass(frozen=True)
class FeatureTrack:
    """A per-frame sidecar feature matrix, shape (dim, N)."""

    name: str
    values: np.ndarray

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class SpeakingTrack:
    """Boolean per-frame flag: the participant is speaking."""

    speaking: np.ndarray

    @property
    def n_frames(self) -> int:
        return self.speaking.shape[0]


def parse_pose_file(path, schema: KeypointSchema, fps: float) -> PoseSequence:
    """Parse a pose JSON file: a list of {"t": int, "points": [[x, y, c], ...]}."""
    try:
        with open(path) as f:
            frames = json.load(f)
    except json.JSONDecodeError as e:
        raise DataError(f"pose file {path}: invalid JSON at line {e.lineno}: {e.msg}") from e
    if not isinstance(frames, list) or not frames:
        raise DataError(f"pose file {path}: expected a non-empty JSON array of frames")

    n_points = None
    coords = []
    confs = []
    for i, frame in enumerate(frames):
        if not isinstance(frame, dict) or "points" not in frame:
            raise DataError(f"pose file {path}: frame {i} missing 'points' field")
        pts = frame["points"]
        if n_points is None:
            n_points = len(pts)
        elif len(pts) != n_points:
            raise DataError(
                f"pose file {path}: frame {i} has {len(pts)} keypoints, expected {n_points}"
            )
        xy = np.full((n_points, 2), np.nan)
        c = np.zeros(n_points)
        for j, p in enumerate(pts):
            if len(p) < 2:
                raise DataError(f"pose file {path}: frame {i} point {j} needs [x, y(, conf)]")
            x, y = p[0], p[1]
            conf = float(p[2]) if len(p) > 2 else 1.0
            if not 0.0 <= conf <= 1.0:
                raise DataError(f"pose file {path}: frame {i} point {j} confidence {conf} not in [0,1]")
            missing = x is None or y is None or conf == 0.0
            if not missing and (not np.isfinite(x) or not np.isfinite(y)):
                missing = True
            if not missing:
                xy[j] = (float(x), float(y))
            c[j] = conf
        coords.append(xy)
        confs.append(c)

    return PoseSequence(fps=fps, coords=np.array(coords), confidence=np.array(confs), schema=schema)


def _read_timestamped_csv(path) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Read a sidecar CSV: header row, first column timestamp (s)."""
    with open(path) as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        times = []
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(f"{path}: line {lineno} has {len(row)} fields, expected {len(header)}")
            try:
                times.append(float(row[0]))
                rows.append([float(v) for v in row[1:]])
            except ValueError as e:
                raise DataError(f"{path}: line {lineno}: non-numeric value ({e})") from e
    if not rows:
        raise DataError(f"{path}: no data rows")
    return np.array(times), np.array(rows), header[1:]


def resample_nearest(times: np.ndarray, values: np.ndarray, frame_times: np.ndarray) -> np.ndarray:
    """Pick, for each frame time, the sample with the nearest timestamp.

    values is (n_samples, dim); returns (dim, n_frames).
    """
    order = np.argsort(times, kind="stable")
    times = times[order]
    values = values[order]
    idx = np.searchsorted(times, frame_times)
    idx = np.clip(idx, 1, len(times) - 1)
    left = times[idx - 1]
    right = times[idx]
    # ties go to the earlier sample
    pick = np.where(np.abs(frame_times - left) <= np.abs(right - frame_times), idx - 1, idx)
    return values[pick].T


def load_feature_track(path, name: str, n_frames: int, fps: float) -> FeatureTrack:
    times, values, _ = _read_timestamped_csv(path)
    expected = TRACK_DIMS.get(name)
    if expected is not None and values.shape[1] != expected:
        raise DataError(f"{path}: track {name!r} has {values.shape[1]} dims, expected {expected}")
    frame_times = np.arange(n_frames) / fps
    return FeatureTrack(name=name, values=resample_nearest(times, values, frame_times))


def load_diarization(path, n_frames: int, fps: float, participant_speaker: str) -> SpeakingTrack:
    """Turn (start_s, end_s, speaker_id) rows into a per-frame speaking flag.

    A frame speaks when start_s <= t/fps < end_s for a participant interval.
    """
    speaking = np.zeros(n_frames, dtype=bool)
    frame_times = np.arange(n_frames) / fps
    with open(path) as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty diarization file")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise DataError(f"{path}: line {lineno}: expected (start_s, end_s, speaker_id)")
            try:
                start, end = float(row[0]), float(row[1])
            except ValueError as e:
                raise DataError(f"{path}: line {lineno}: non-numeric interval ({e})") from e
            if row[2] == participant_speaker:
                speaking |= (frame_times >= start) & (frame_times < end)
    return SpeakingTrack(speaking=speaking)


def load_session(
    pose_path,
    sidecar_paths: dict,
    schema: KeypointSchema,
    fps: float = 26.0,
    participant_speaker: str = "participant",
) -> tuple[PoseSequence, dict[str, FeatureTrack], SpeakingTrack]:
    """Load one session: pose + sidecar tracks, all aligned to video frames.

    sidecar_paths maps track names ('aus', 'gaze', 'mfccs', 'diarization')
    to file paths. Missing pose values stay flagged as NaN.
    """
    seq = parse_pose_file(pose_path, schema, fps)
    tracks = {}
    speaking = SpeakingTrack(speaking=np.zeros(seq.n_frames, dtype=bool))
    for name, path in sidecar_paths.items():
        if name == "diarization":
            speaking = load_diarization(path, seq.n_frames, fps, participant_speaker)
        else:
            tracks[name] = load_feature_track(path, name, seq.n_frames, fps)
    return seq, tracks, speaking


def _fill_sparse_keypoint(coords: np.ndarray, j: int, group: list[int]) -> np.ndarray:
    """Fallback fill for a keypoint observed <4 times: its group centroid."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=RuntimeWarning)
        centroid = np.nanmean(coords[:, group, :], axis=1)
    filled = coords[:, j, :].copy()
    missing = np.isnan(filled[:, 0])
    usable = ~np.isnan(centroid[:, 0])
    if not usable.any():
        raise DataError(f"keypoint {j}: too few observations and its group is fully missing")
    # backfill centroid gaps from the nearest observed centroid frame
    obs_idx = np.flatnonzero(usable)
    nearest = obs_idx[np.argmin(np.abs(np.arange(len(centroid))[:, None] - obs_idx[None, :]), axis=1)]
    centroid = centroid[nearest]
    filled[missing] = centroid[missing]
    return filled


def interpolate_missing(seq: PoseSequence) -> PoseSequence:
    """Fill missing coordinates by cubic-spline interpolation per keypoint.

    Observed samples pass through bit-exact. Runs at the sequence boundaries
    are constant-extrapolated from the nearest observed frame. Keypoints with
    fewer than 4 observations fall back to their localization-group centroid
    (with a warning).
    """
    if not seq.has_missing():
        return seq

    coords = seq.coords.copy()
    n = seq.n_frames
    t = np.arange(n)
    groups_by_kp: dict[int, list[int]] = {}
    for name, idx in seq.schema.groups.items():
        for j in idx:
            groups_by_kp.setdefault(j, idx)

    for j in range(seq.n_points):
        observed = ~np.isnan(seq.coords[:, j, 0])
        if observed.all():
            continue
        n_obs = int(observed.sum())
        if n_obs < 4:
            group = [g for g in groups_by_kp.get(j, []) if g != j]
            if not group:
                raise DataError(f"keypoint {j}: only {n_obs} observations and no group for fallback")
            warnings.warn(
                f"keypoint {j} observed {n_obs} times (<4); filling from group centroid",
                stacklevel=2,
            )
            coords[:, j, :] = _fill_sparse_keypoint(seq.coords, j, group)
            continue
        t_obs = t[observed]
        first, last = t_obs[0], t_obs[-1]
        interior = ~observed & (t >= first) & (t <= last)
        for axis in range(2):
            spline = CubicSpline(t_obs, seq.coords[observed, j, axis])
            if interior.any():
                coords[interior, j, axis] = spline(t[interior])
            coords[t < first, j, axis] = seq.coords[first, j, axis]
            coords[t > last, j, axis] = seq.coords[last, j, axis]

    return replace(seq, coords=coords)


def smooth(seq: PoseSequence, window: int = 11, polyorder: int = 3) -> PoseSequence:
    """Savitzky-Golay filter each coordinate along time (mirror-padded ends)."""
    if window % 2 == 0:
        raise DataError(f"window must be odd, got {window}")
    if polyorder >= window:
        raise DataError(f"polyorder {polyorder} must be < window {window}")
    if seq.n_frames < window:
        raise DataError(
            f"sequence has {seq.n_frames} frames < window {window}; skip smoothing for this session"
        )
    if seq.has_missing():
        raise DataError("smooth() requires a fully observed sequence; interpolate first")
    coords = savgol_filter(seq.coords, window, polyorder, axis=0, mode="mirror")
    return replace(seq, coords=coords)


def torso_length(seq: PoseSequence) -> float:
    """Session-median neck-to-mid-hip distance."""
    neck = seq.coords[:, seq.schema.neck, :]
    hip = seq.coords[:, seq.schema.mid_hip, :]
    dist = np.linalg.norm(neck - hip, axis=1)
    length = float(np.nanmedian(dist))
    if not np.isfinite(length) or length <= 0:
        raise DataError("degenerate torso: median neck-to-mid-hip distance is zero or undefined")
    return length


def normalize_scale(seq: PoseSequence) -> PoseSequence:
    """Divide all coordinates by the session torso length (camera-distance invariance)."""
    return replace(seq, coords=seq.coords / torso_length(seq))


def preprocess(seq: PoseSequence, window: int = 11, polyorder: int = 3) -> PoseSequence:
    """interpolate -> smooth -> scale-normalize; output has no missing values."""
    out = interpolate_missing(seq)
    if out.n_frames >= window:
        out = smooth(out, window, polyorder)
    out = normalize_scale(out)
    if out.has_missing():
        raise DataError("preprocessing left missing coordinates")
    return out
