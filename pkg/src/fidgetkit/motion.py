"""DYNAMIC/STATIC classification of location-event trajectory slices.

Events are cut into 100-frame windows (step 50). Each slice yields FFT band
magnitudes on a fixed 41-point grid over [0.5, 2.5] Hz plus per-trajectory
std and mean, and a per-category random forest labels it DYNAMIC or STATIC.
"""

from __future__ import annotations

import hashlib
import pickle
from dataclasses import dataclass

import numpy as np
from sklearn.ensemble import RandomForestClassifier

from fidgetkit.adaptors import LocationTimeline, runs
from fidgetkit.errors import DataError, ModelError
from fidgetkit.ingest import PoseSequence

SLICE_LEN = 100
SLICE_STEP = 50

BAND_LO = 0.5
BAND_HI = 2.5
BAND_STEP = 0.05
#: The fixed spectral grid: 41 points from 0.50 to 2.50 Hz.
BAND_GRID = np.round(np.arange(BAND_LO, BAND_HI + BAND_STEP / 2, BAND_STEP), 10)

CATEGORIES = ("BOTH", "LEFT", "RIGHT", "LEG")

DYNAMIC = "DYNAMIC"
STATIC = "STATIC"

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class TrajectorySlice:
    """One 100-frame window of limb trajectories under a location event.

    trajectories has shape (2 * n_keypoints, SLICE_LEN): x rows then y rows
    interleaved per keypoint.
    """

    category: str
    channel: str
    code: str
    start: int
    trajectories: np.ndarray
    session: str = ""

    def __post_init__(self):
        if self.trajectories.shape[1] != SLICE_LEN:
            raise DataError(f"slice must span exactly {SLICE_LEN} frames")
        if self.category not in CATEGORIES:
            raise DataError(f"unknown category {self.category!r}")

    @property
    def end(self) -> int:
        return self.start + SLICE_LEN

    @property
    def center(self) -> float:
        return self.start + SLICE_LEN / 2


@dataclass(frozen=True)
class SliceFeatures:
    """Band spectrum (41), per-trajectory std, and per-trajectory mean."""

    fft: np.ndarray
    std: np.ndarray
    mean: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.fft, self.std, self.mean])


def _limb_indices(schema, category: str) -> list[int]:
    if category == "BOTH":
        return schema.hands
    if category == "LEFT":
        return sorted(schema["hand_left"])
    if category == "RIGHT":
        return sorted(schema["hand_right"])
    if category == "LEG":
        return schema.legs
    raise DataError(f"unknown category {category!r}")


def _category_for(channel: str, code: str) -> str | None:
    if channel == "legs":
        return "LEG"
    if code == "H2H":
        return "BOTH"
    return "LEFT" if channel == "left" else "RIGHT"


def slice_sessions(seq: PoseSequence, timeline: LocationTimeline, session: str = "") -> list[TrajectorySlice]:
    """Cut every location-event run into sliding windows.

    Windows are anchored at each run's start and advance by SLICE_STEP while
    they fit inside the run; runs shorter than SLICE_LEN yield nothing. H2H
    runs are emitted once (category BOTH) with both hands' keypoints.
    """
    slices = []
    for channel in ("left", "right", "legs"):
        codes = timeline.channel(channel)
        for start, end, code in runs(codes):
            if channel == "right" and code == "H2H":
                continue  # already emitted as BOTH from the left channel
            category = _category_for(channel, code)
            length = end - start + 1
            if length < SLICE_LEN:
                continue
            idx = _limb_indices(seq.schema, category)
            for off in range(0, length - SLICE_LEN + 1, SLICE_STEP):
                w0 = start + off
                window = seq.coords[w0 : w0 + SLICE_LEN, idx, :]  # (100, P, 2)
                traj = window.transpose(1, 2, 0).reshape(-1, SLICE_LEN)
                slices.append(
                    TrajectorySlice(
                        category=category,
                        channel=channel,
                        code=code,
                        start=w0,
                        trajectories=traj,
                        session=session,
                    )
                )
    return slices


def slice_features(sl: TrajectorySlice, fps: float) -> SliceFeatures:
    """Spectral and distributional features of one slice.

    Each trajectory is mean-removed and zero-padded so the FFT bin spacing
    comes out at ~0.05 Hz, then its magnitude spectrum is read off at the
    fixed 41-point grid (nearest bin) and averaged across trajectories.
    std and mean are computed on the raw trajectories along time.
    """
    if fps <= 5:
        raise DataError(f"fps {fps} too low: the 2.5 Hz band needs fps > 5")
    traj = sl.trajectories
    centered = traj - traj.mean(axis=1, keepdims=True)
    n_pad = int(np.ceil(fps / BAND_STEP))
    spectrum = np.abs(np.fft.rfft(centered, n=n_pad, axis=1))
    freqs = np.fft.rfftfreq(n_pad, d=1.0 / fps)
    grid_bins = np.array([int(np.argmin(np.abs(freqs - f))) for f in BAND_GRID])
    fft_feature = spectrum[:, grid_bins].mean(axis=0)
    return SliceFeatures(fft=fft_feature, std=traj.std(axis=1), mean=traj.mean(axis=1))


@dataclass
class ActionClassifier:
    """A trained DYNAMIC/STATIC classifier for one slice category."""

    category: str
    model: RandomForestClassifier
    feature_dim: int

    def classify(self, features: SliceFeatures) -> str:
        vec = features.as_vector()
        if vec.shape[0] != self.feature_dim:
            raise ModelError(
                f"{self.category}: feature dim {vec.shape[0]} != trained dim {self.feature_dim}"
            )
        return str(self.model.predict(vec[None, :])[0])

    def score(self, features: SliceFeatures) -> float:
        """Probability assigned to DYNAMIC."""
        vec = features.as_vector()[None, :]
        classes = list(self.model.classes_)
        proba = self.model.predict_proba(vec)[0]
        return float(proba[classes.index(DYNAMIC)]) if DYNAMIC in classes else 0.0


def classify_slice(classifier: ActionClassifier, features: SliceFeatures) -> str:
    return classifier.classify(features)


def _partition_participants(participants: list[str], folds: int, rng: np.random.Generator) -> list[list[str]]:
    unique = sorted(set(participants))
    if len(unique) < folds:
        raise DataError(f"{len(unique)} participants cannot fill {folds} folds")
    order = list(rng.permutation(unique))
    return [order[i::folds] for i in range(folds)]


def _f1(y_true: np.ndarray, y_pred: np.ndarray, positive: str = DYNAMIC) -> float:
    tp = np.sum((y_pred == positive) & (y_true == positive))
    fp = np.sum((y_pred == positive) & (y_true != positive))
    fn = np.sum((y_pred != positive) & (y_true == positive))
    denom = 2 * tp + fp + fn
    return float(2 * tp / denom) if denom else 0.0


def train_action_classifier(
    slices: list[TrajectorySlice],
    labels: list[str],
    fps: float,
    folds: int = 5,
    seed: int = 0,
    n_estimators: int = 100,
    max_depth: int = 8,
) -> tuple[dict[str, ActionClassifier], dict[str, dict[str, float]]]:
    """Fit one classifier per category with participant-partitioned CV.

    Participants are dealt into ``folds`` groups and evaluation is slice-level
    on the held-out group. Returns the final models (fit on all slices) and a
    per-category report with accuracy/F1 means and standard deviations.
    """
    if len(slices) != len(labels):
        raise DataError("slices and labels must align")
    report: dict[str, dict[str, float]] = {}
    models: dict[str, ActionClassifier] = {}

    for category in CATEGORIES:
        cat_idx = [i for i, s in enumerate(slices) if s.category == category]
        if not cat_idx:
            continue
        X = np.array([slice_features(slices[i], fps).as_vector() for i in cat_idx])
        y = np.array([labels[i] for i in cat_idx])
        parts = [slices[i].session for i in cat_idx]
        if len(set(y)) < 2:
            raise DataError(f"category {category}: needs both DYNAMIC and STATIC slices")

        rng = np.random.default_rng(seed)
        fold_members = _partition_participants(parts, folds, rng)
        accs, f1s = [], []
        for fold in fold_members:
            test = np.isin(parts, fold)
            if not test.any() or test.all():
                continue
            if len(set(y[~test])) < 2:
                raise DataError(f"category {category}: a training fold is single-class")
            clf = RandomForestClassifier(
                n_estimators=n_estimators, max_depth=max_depth, random_state=seed,
                class_weight="balanced", n_jobs=1,
            )
            clf.fit(X[~test], y[~test])
            pred = clf.predict(X[test])
            accs.append(float(np.mean(pred == y[test])))
            if (y[test] == DYNAMIC).any():
                f1s.append(_f1(y[test], pred))

        final = RandomForestClassifier(
            n_estimators=n_estimators, max_depth=max_depth, random_state=seed,
            class_weight="balanced", n_jobs=1,
        )
        final.fit(X, y)
        models[category] = ActionClassifier(category=category, model=final, feature_dim=X.shape[1])
        report[category] = {
            "acc": float(np.mean(accs)),
            "acc_std": float(np.std(accs)),
            "f1": float(np.mean(f1s)) if f1s else 0.0,
            "f1_std": float(np.std(f1s)) if f1s else 0.0,
            "n_slices": len(cat_idx),
        }
    if not models:
        raise DataError("no slices in any category")
    return models, report


def schema_hash(schema) -> str:
    return hashlib.sha256(schema.to_json().encode()).hexdigest()


def save_action_models(models: dict[str, ActionClassifier], path, schema, fps: float) -> None:
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "schema_hash": schema_hash(schema),
        "fps": fps,
        "models": {c: (m.model, m.feature_dim) for c, m in models.items()},
    }
    with open(path, "wb") as f:
        pickle.dump(payload, f)


def load_action_models(path, schema) -> dict[str, ActionClassifier]:
    try:
        with open(path, "rb") as f:
            payload = pickle.load(f)
    except FileNotFoundError:
        raise ModelError(f"action model file not found: {path}") from None
    except (pickle.UnpicklingError, EOFError) as e:
        raise ModelError(f"cannot read action model {path}: {e}") from e
    if payload.get("format_version") != MODEL_FORMAT_VERSION:
        raise ModelError(f"action model {path}: unsupported format version")
    if payload.get("schema_hash") != schema_hash(schema):
        raise ModelError(f"action model {path}: trained on a different keypoint schema")
    return {
        c: ActionClassifier(category=c, model=m, feature_dim=d)
        for c, (m, d) in payload["models"].items()
    }
