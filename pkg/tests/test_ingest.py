"""Loading, alignment, interpolation, and smoothing contracts."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fidgetkit.errors import DataError
from fidgetkit.ingest import (
    interpolate_missing,
    load_diarization,
    load_session,
    normalize_scale,
    parse_pose_file,
    preprocess,
    resample_nearest,
    smooth,
    torso_length,
)
from fidgetkit.schema import DEFAULT_N_POINTS

from conftest import build_sequence, constant_pose


def write_pose_file(path, frames):
    with open(path, "w") as f:
        json.dump(frames, f)


def simple_frames(n_frames, n_points=25, conf=1.0):
    return [
        {"t": t, "points": [[float(j), float(t + j), conf] for j in range(n_points)]}
        for t in range(n_frames)
    ]


class TestLoading:
    def test_identity_load_three_frames(self, tmp_path, schema):
        # 25-keypoint frames load as-is; schema max index must fit, so use 29
        path = tmp_path / "pose.json"
        write_pose_file(path, simple_frames(3, n_points=DEFAULT_N_POINTS))
        seq = parse_pose_file(path, schema, fps=26.0)
        assert seq.n_frames == 3
        assert seq.n_points == DEFAULT_N_POINTS
        assert not seq.has_missing()

    def test_malformed_json_names_line(self, tmp_path, schema):
        path = tmp_path / "pose.json"
        path.write_text('[{"t": 0, "points": [[1, 2, 0.5]\n]')
        with pytest.raises(DataError, match="line"):
            parse_pose_file(path, schema, fps=26.0)

    def test_inconsistent_keypoint_counts(self, tmp_path, schema):
        frames = simple_frames(2, n_points=DEFAULT_N_POINTS)
        frames[1]["points"] = frames[1]["points"][:-1]
        path = tmp_path / "pose.json"
        write_pose_file(path, frames)
        with pytest.raises(DataError, match="keypoints"):
            parse_pose_file(path, schema, fps=26.0)

    def test_zero_confidence_flags_missing(self, tmp_path, schema):
        frames = simple_frames(5, n_points=DEFAULT_N_POINTS)
        frames[2]["points"][4][2] = 0.0
        path = tmp_path / "pose.json"
        write_pose_file(path, frames)
        seq = parse_pose_file(path, schema, fps=26.0)
        assert np.isnan(seq.coords[2, 4]).all()
        assert not np.isnan(seq.coords[1, 4]).any()

    def test_null_coordinates_flag_missing(self, tmp_path, schema):
        frames = simple_frames(5, n_points=DEFAULT_N_POINTS)
        frames[3]["points"][0] = [None, None, 0.9]
        path = tmp_path / "pose.json"
        write_pose_file(path, frames)
        seq = parse_pose_file(path, schema, fps=26.0)
        assert np.isnan(seq.coords[3, 0]).all()


class TestResampling:
    def test_nearest_neighbor_on_ramp_matches_oracle(self):
        # 100 Hz ramp resampled to 26 fps frames
        times = np.arange(0, 4, 0.01)
        values = times[:, None] * 3.0  # ramp signal
        frame_times = np.arange(100) / 26.0
        resampled = resample_nearest(times, values, frame_times)
        # independent oracle: brute-force nearest timestamp per frame
        oracle = np.array(
            [values[np.argmin(np.abs(times - ft))][0] for ft in frame_times]
        )
        assert np.array_equal(resampled[0], oracle)

    def test_track_columns_equal_sequence_length(self, tmp_path, schema):
        n = 40
        frames = simple_frames(n, n_points=DEFAULT_N_POINTS)
        pose_path = tmp_path / "pose.json"
        write_pose_file(pose_path, frames)
        mfcc_path = tmp_path / "mfccs.csv"
        with open(mfcc_path, "w") as f:
            f.write("t," + ",".join(f"m{i}" for i in range(13)) + "\n")
            for k in range(200):
                f.write(",".join([str(k * 0.01)] + [str(float(k))] * 13) + "\n")
        seq, tracks, _ = load_session(pose_path, {"mfccs": mfcc_path}, schema, fps=26.0)
        assert tracks["mfccs"].values.shape == (13, n)

    def test_wrong_track_dim_rejected(self, tmp_path, schema):
        pose_path = tmp_path / "pose.json"
        write_pose_file(pose_path, simple_frames(10, n_points=DEFAULT_N_POINTS))
        bad = tmp_path / "gaze.csv"
        bad.write_text("t,a,b\n0.0,1,2\n")
        with pytest.raises(DataError, match="dims"):
            load_session(pose_path, {"gaze": bad}, schema, fps=26.0)


class TestDiarization:
    def test_hand_computed_frame_boundaries(self, tmp_path):
        # participant speaks on [2s, 4s) at 26 fps -> frames 52..103
        path = tmp_path / "diar.csv"
        path.write_text(
            "start_s,end_s,speaker_id\n0.0,2.0,interviewer\n2.0,4.0,participant\n"
        )
        track = load_diarization(path, n_frames=130, fps=26.0, participant_speaker="participant")
        on = np.flatnonzero(track.speaking)
        assert on[0] == 52
        assert on[-1] == 103
        assert len(on) == 52


class TestInterpolation:
    def test_fully_observed_unchanged(self, still_sequence):
        out = interpolate_missing(still_sequence)
        assert out is still_sequence

    def test_cubic_recovered_exactly(self, schema):
        # one deleted sample of y(t) = t^3 recovered by the spline
        n = 10
        coords = np.zeros((n, DEFAULT_N_POINTS, 2))
        t = np.arange(n, dtype=float)
        coords[:, :, 0] = t[:, None]
        coords[:, :, 1] = (t**3)[:, None]
        coords[5, 3] = np.nan
        seq = build_sequence(coords, schema=schema)
        out = interpolate_missing(seq)
        assert abs(out.coords[5, 3, 1] - 125.0) < 1e-6
        assert abs(out.coords[5, 3, 0] - 5.0) < 1e-6

    def test_observed_samples_pass_through_bit_exact(self, schema):
        rng = np.random.default_rng(3)
        coords = rng.uniform(0, 100, (30, DEFAULT_N_POINTS, 2))
        original = coords.copy()
        coords[10:13, 7] = np.nan
        seq = build_sequence(coords, schema=schema)
        out = interpolate_missing(seq)
        observed = ~np.isnan(coords[:, :, 0])
        assert np.array_equal(out.coords[observed], original[observed])

    def test_boundary_run_constant_extrapolated(self, schema):
        n = 12
        coords = np.tile(np.linspace(0, 11, n)[:, None, None], (1, DEFAULT_N_POINTS, 2))
        coords[-3:, 5] = np.nan
        seq = build_sequence(coords, schema=schema)
        out = interpolate_missing(seq)
        # last observed value for keypoint 5 is at t=8 (value 8.0)
        assert np.allclose(out.coords[-3:, 5], 8.0)

    def test_sparse_keypoint_falls_back_to_group_centroid(self, schema):
        rng = np.random.default_rng(0)
        coords = rng.uniform(0, 10, (20, DEFAULT_N_POINTS, 2))
        kp = schema["hand_left"][0]
        coords[3:, kp] = np.nan  # only 3 observations
        seq = build_sequence(coords, schema=schema)
        with pytest.warns(UserWarning, match="centroid"):
            out = interpolate_missing(seq)
        assert not np.isnan(out.coords).any()


class TestSmoothing:
    def test_constant_unchanged(self, still_sequence):
        out = smooth(still_sequence)
        assert np.allclose(out.coords, still_sequence.coords, atol=1e-12)

    def test_cubic_preserved_to_1e9(self, schema):
        n = 40
        t = np.arange(n, dtype=float)
        y = 2 * t**3 - t
        coords = np.zeros((n, DEFAULT_N_POINTS, 2))
        coords[:, :, 0] = t[:, None]
        coords[:, :, 1] = y[:, None]
        seq = build_sequence(coords, schema=schema)
        out = smooth(seq, window=11, polyorder=3)
        interior = slice(5, n - 5)
        assert np.max(np.abs(out.coords[interior, :, 1] - y[interior, None])) < 1e-9

    def test_impulse_center_equals_design_matrix_coefficient(self, schema):
        # oracle: SG center coefficient from the least-squares design matrix
        x = np.arange(-5, 6, dtype=float)
        design = np.vander(x, 4, increasing=True)
        kernel_center = (np.linalg.pinv(design.T @ design) @ design.T)[0]
        center_coeff = kernel_center[5]

        n = 21
        coords = np.zeros((n, DEFAULT_N_POINTS, 2))
        coords[10, :, 1] = 1.0  # unit impulse at the center
        seq = build_sequence(coords, schema=schema)
        out = smooth(seq, window=11, polyorder=3)
        assert abs(out.coords[10, 0, 1] - center_coeff) < 1e-12

    def test_short_sequence_instructs_to_skip(self, schema):
        coords = np.zeros((5, DEFAULT_N_POINTS, 2))
        seq = build_sequence(coords)
        with pytest.raises(DataError, match="skip smoothing"):
            smooth(seq, window=11)


class TestNormalization:
    def test_torso_length_and_scaling(self, still_sequence):
        length = torso_length(still_sequence)
        assert length == pytest.approx(100.0, rel=1e-12)
        out = normalize_scale(still_sequence)
        assert torso_length(out) == pytest.approx(1.0, rel=1e-12)

    def test_preprocess_idempotent_on_constant(self, still_sequence):
        once = preprocess(still_sequence)
        twice = preprocess(once)
        assert np.allclose(once.coords, twice.coords, atol=1e-12)

    def test_preprocess_leaves_no_missing(self, schema):
        seq = constant_pose(60)
        coords = seq.coords.copy()
        coords[20:25, 2] = np.nan
        out = preprocess(build_sequence(coords, schema=schema))
        assert not out.has_missing()


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=28), st.integers(min_value=4, max_value=20))
def test_interpolation_never_alters_observed(kp, n_missing):
    rng = np.random.default_rng(kp * 100 + n_missing)
    n = 40
    coords = rng.uniform(0, 50, (n, DEFAULT_N_POINTS, 2))
    original = coords.copy()
    missing_idx = rng.choice(n, size=min(n_missing, n - 4), replace=False)
    coords[missing_idx, kp] = np.nan
    seq = build_sequence(coords)
    out = interpolate_missing(seq)
    observed = ~np.isnan(coords[:, :, 0])
    assert np.array_equal(out.coords[observed], original[observed])
