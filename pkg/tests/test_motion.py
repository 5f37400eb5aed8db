"""Trajectory slicing, band-spectrum features, and the action classifiers."""

import numpy as np
import pytest

from fidgetkit.adaptors import LocationTimeline
from fidgetkit.errors import DataError, ModelError
from fidgetkit.motion import (
    BAND_GRID,
    DYNAMIC,
    STATIC,
    SLICE_LEN,
    TrajectorySlice,
    classify_slice,
    load_action_models,
    save_action_models,
    slice_features,
    slice_sessions,
    train_action_classifier,
)
from fidgetkit.schema import default_schema

from conftest import constant_pose


def timeline_with(left=None, right=None, legs=None, n=600):
    return LocationTimeline(
        left_hand=left or ["HF"] * n,
        right_hand=right or ["HF"] * n,
        legs=legs or ["L2G"] * n,
    )


def hand_run(code, start, length, n=600):
    codes = ["HF"] * n
    for t in range(start, start + length):
        codes[t] = code
    return codes


class TestSliceSessions:
    def test_h2h_event_of_100_frames_gives_one_both_slice(self, still_sequence):
        n = still_sequence.n_frames
        tl = timeline_with(
            left=hand_run("H2H", 50, 100, n), right=hand_run("H2H", 50, 100, n), n=n
        )
        slices = [s for s in slice_sessions(still_sequence, tl) if s.category == "BOTH"]
        assert len(slices) == 1
        assert slices[0].start == 50
        assert slices[0].trajectories.shape == (24, SLICE_LEN)

    def test_200_frame_event_gives_three_slices(self):
        seq = constant_pose(400)
        tl = timeline_with(left=hand_run("H2L", 60, 200, 400), n=400)
        slices = [s for s in slice_sessions(seq, tl) if s.code == "H2L"]
        assert [s.start - 60 for s in slices] == [0, 50, 100]
        assert all(s.category == "LEFT" for s in slices)
        assert all(s.trajectories.shape == (12, SLICE_LEN) for s in slices)

    def test_99_frame_event_gives_no_slice(self):
        seq = constant_pose(400)
        tl = timeline_with(left=hand_run("H2L", 60, 99, 400), n=400)
        assert [s for s in slice_sessions(seq, tl) if s.code == "H2L"] == []

    def test_h2h_not_duplicated_across_channels(self):
        seq = constant_pose(300)
        tl = timeline_with(
            left=hand_run("H2H", 0, 300, 300), right=hand_run("H2H", 0, 300, 300), n=300
        )
        cats = [s.category for s in slice_sessions(seq, tl)]
        assert cats.count("BOTH") == 5
        assert "LEFT" not in cats and "RIGHT" not in cats


def make_slice(traj, category="LEG", code="L2G", channel="legs", start=0):
    return TrajectorySlice(
        category=category, channel=channel, code=code, start=start,
        trajectories=np.asarray(traj, dtype=float), session="P",
    )


class TestSliceFeatures:
    def test_grid_contract(self):
        assert len(BAND_GRID) == 41
        assert BAND_GRID[0] == 0.5
        assert BAND_GRID[-1] == 2.5
        assert np.allclose(np.diff(BAND_GRID), 0.05)

    def test_constant_trajectories(self):
        traj = np.full((4, SLICE_LEN), 7.0)
        feats = slice_features(make_slice(traj), fps=26.0)
        assert np.allclose(feats.fft, 0.0)
        assert np.allclose(feats.std, 0.0)
        assert np.allclose(feats.mean, 7.0)

    @pytest.mark.parametrize("fps", [26.0, 25.0, 30.0, 29.97])
    def test_sinusoid_peaks_at_grid_frequency(self, fps):
        # the grid stays 41 points for every fps; the peak lands within a step
        t = np.arange(SLICE_LEN)
        traj = np.sin(2 * np.pi * 1.0 * t / fps)[None, :]
        feats = slice_features(make_slice(traj), fps=fps)
        assert feats.fft.shape == (41,)
        peak = BAND_GRID[int(np.argmax(feats.fft))]
        assert abs(peak - 1.0) <= 0.05

    def test_matches_direct_dft_oracle(self):
        fps = 26.0
        rng = np.random.default_rng(0)
        traj = rng.standard_normal((3, SLICE_LEN))
        feats = slice_features(make_slice(traj), fps=fps)
        # oracle: direct DFT of the zero-padded, mean-removed signal
        n_pad = int(np.ceil(fps / 0.05))
        centered = traj - traj.mean(axis=1, keepdims=True)
        padded = np.zeros((3, n_pad))
        padded[:, :SLICE_LEN] = centered
        k = np.arange(n_pad)
        oracle = np.empty((3, len(BAND_GRID)))
        for gi, f in enumerate(BAND_GRID):
            bin_idx = int(np.argmin(np.abs(np.fft.rfftfreq(n_pad, 1 / fps) - f)))
            basis = np.exp(-2j * np.pi * bin_idx * k / n_pad)
            oracle[:, gi] = np.abs(padded @ basis)
        assert np.allclose(feats.fft, oracle.mean(axis=0), atol=1e-9)

    def test_averaging_across_trajectories(self):
        fps = 26.0
        t = np.arange(SLICE_LEN)
        a = np.sin(2 * np.pi * 1.0 * t / fps)
        b = np.sin(2 * np.pi * 2.0 * t / fps)
        fa = slice_features(make_slice(a[None, :]), fps).fft
        fb = slice_features(make_slice(b[None, :]), fps).fft
        fab = slice_features(make_slice(np.stack([a, b])), fps).fft
        assert np.allclose(fab, (fa + fb) / 2, atol=1e-12)

    def test_translation_invariance(self):
        rng = np.random.default_rng(1)
        traj = rng.standard_normal((5, SLICE_LEN))
        f1 = slice_features(make_slice(traj), 26.0)
        f2 = slice_features(make_slice(traj + 100.0), 26.0)
        assert np.allclose(f1.fft, f2.fft, atol=1e-9)
        assert np.allclose(f1.std, f2.std, atol=1e-9)
        assert np.allclose(f2.mean, f1.mean + 100.0)

    def test_low_fps_rejected(self):
        with pytest.raises(DataError, match="fps"):
            slice_features(make_slice(np.zeros((2, SLICE_LEN))), fps=4.0)


def separable_corpus(n_per_class=150, n_participants=10, seed=0, category="LEG"):
    """Oscillating (1-2 Hz) vs still slices, participants round-robin."""
    rng = np.random.default_rng(seed)
    t = np.arange(SLICE_LEN)
    slices, labels = [], []
    for i in range(n_per_class * 2):
        dynamic = i % 2 == 0
        traj = rng.normal(0, 0.01, (6, SLICE_LEN))
        if dynamic:
            freq = rng.uniform(1.0, 2.0)
            traj[: 2] += 0.05 * np.sin(2 * np.pi * freq * t / 26.0 + rng.uniform(0, np.pi))
        sl = TrajectorySlice(
            category=category, channel="legs", code="L2G", start=0,
            trajectories=traj, session=f"P{i % n_participants}",
        )
        slices.append(sl)
        labels.append(DYNAMIC if dynamic else STATIC)
    return slices, labels


class TestActionClassifier:
    def test_separable_corpus_cv_accuracy(self):
        slices, labels = separable_corpus()
        models, report = train_action_classifier(slices, labels, fps=26.0, seed=0)
        assert report["LEG"]["acc"] >= 0.95

    def test_permuted_labels_are_chance_level(self):
        slices, labels = separable_corpus(n_per_class=200)
        rng = np.random.default_rng(99)
        permuted = list(rng.permutation(labels))
        _, report = train_action_classifier(slices, permuted, fps=26.0, seed=0)
        assert 0.4 <= report["LEG"]["acc"] <= 0.6

    def test_all_zero_features_classify_static(self):
        slices, labels = separable_corpus()
        models, _ = train_action_classifier(slices, labels, fps=26.0, seed=0)
        still = slice_features(make_slice(np.zeros((6, SLICE_LEN))), 26.0)
        assert classify_slice(models["LEG"], still) == STATIC

    def test_strong_band_energy_classifies_dynamic(self):
        slices, labels = separable_corpus()
        models, _ = train_action_classifier(slices, labels, fps=26.0, seed=0)
        t = np.arange(SLICE_LEN)
        moving = np.tile(0.05 * np.sin(2 * np.pi * 1.5 * t / 26.0), (6, 1))
        feats = slice_features(make_slice(moving), 26.0)
        assert classify_slice(models["LEG"], feats) == DYNAMIC

    def test_determinism(self):
        slices, labels = separable_corpus()
        models, _ = train_action_classifier(slices, labels, fps=26.0, seed=0)
        t = np.arange(SLICE_LEN)
        feats = slice_features(
            make_slice(np.tile(np.sin(2 * np.pi * 1.2 * t / 26.0), (6, 1))), 26.0
        )
        assert classify_slice(models["LEG"], feats) == classify_slice(models["LEG"], feats)

    def test_single_class_errors(self):
        slices, labels = separable_corpus(n_per_class=20)
        with pytest.raises(DataError, match="DYNAMIC and STATIC"):
            train_action_classifier(slices, [STATIC] * len(slices), fps=26.0, seed=0)

    def test_feature_dim_mismatch_errors(self):
        slices, labels = separable_corpus()
        models, _ = train_action_classifier(slices, labels, fps=26.0, seed=0)
        bad = slice_features(make_slice(np.zeros((9, SLICE_LEN))), 26.0)
        with pytest.raises(ModelError, match="dim"):
            classify_slice(models["LEG"], bad)

    def test_model_roundtrip_and_schema_hash(self, tmp_path):
        slices, labels = separable_corpus()
        models, _ = train_action_classifier(slices, labels, fps=26.0, seed=0)
        schema = default_schema()
        path = tmp_path / "m.pkl"
        save_action_models(models, path, schema, 26.0)
        loaded = load_action_models(path, schema)
        assert set(loaded) == set(models)
        # tampered schema -> refuse
        groups = {k: list(v) for k, v in schema.groups.items()}
        groups["hand_left"], groups["hand_right"] = groups["hand_right"], groups["hand_left"]
        from fidgetkit.schema import KeypointSchema

        with pytest.raises(ModelError, match="schema"):
            load_action_models(path, KeypointSchema(groups))
