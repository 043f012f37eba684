"""Tests for evaluation metrics."""

import numpy as np
import pytest

from metrichuman.core.error_handler import DomainError
from metrichuman.core.geometry import SE3Pose, so3_exp
from metrichuman.core.metrics import (
    MetricsConfig,
    accel_error,
    ate,
    build_report,
    depth_metrics,
    depth_metrics_sequence,
    fa_mpjpe,
    joint_metrics,
    pa_mpjpe,
    procrustes,
    track_joints,
    track_metrics,
    wa_mpjpe,
)
from metrichuman.core.world_frame import BodyTrack


def rz(degrees):
    return so3_exp(np.array([0.0, 0.0, np.deg2rad(degrees)]))


def drifting_sequence(rng, num_frames=10, num_joints=22, noise=0.005):
    """Ground truth joints and a prediction that drifts in rotation and translation."""
    gt = rng.normal(scale=0.3, size=(num_frames, num_joints, 3)) + np.linspace(0, 1, num_frames)[:, None, None]
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    pred = np.empty_like(gt)
    for t in range(num_frames):
        rotation = so3_exp(0.05 * t * axis)
        pred[t] = gt[t] @ rotation.T + 0.02 * t * axis
    return pred + rng.normal(scale=noise, size=gt.shape), gt


class TestProcrustes:
    """Test procrustes."""

    def test_identity(self, rng):
        x = rng.normal(size=(10, 3))
        alignment = procrustes(x, x)
        assert alignment.scale == pytest.approx(1.0)
        np.testing.assert_allclose(alignment.rotation, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(alignment.translation, np.zeros(3), atol=1e-12)

    def test_recovers_similarity(self, rng):
        x = rng.normal(size=(10, 3))
        y = 2.0 * x @ rz(30).T + np.array([1.0, 0.0, 0.0])
        alignment = procrustes(x, y)
        assert alignment.scale == pytest.approx(2.0)
        np.testing.assert_allclose(alignment.rotation, rz(30), atol=1e-12)
        np.testing.assert_allclose(alignment.translation, [1.0, 0.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(alignment.apply(x), y, atol=1e-12)

    def test_rigid_keeps_unit_scale(self, rng):
        x = rng.normal(size=(10, 3))
        assert procrustes(x, 3.0 * x, with_scale=False).scale == 1.0

    def test_no_reflection(self, rng):
        x = rng.normal(size=(10, 3))
        alignment = procrustes(x, x * np.array([1.0, 1.0, -1.0]))
        assert np.linalg.det(alignment.rotation) == pytest.approx(1.0)

    def test_collinear_is_degenerate(self):
        x = np.outer(np.arange(5.0), [1.0, 2.0, 3.0])
        with pytest.raises(DomainError):
            procrustes(x, x)

    def test_too_few_points(self):
        with pytest.raises(DomainError):
            procrustes(np.zeros((2, 3)), np.zeros((2, 3)))

    def test_shape_mismatch(self):
        with pytest.raises(DomainError):
            procrustes(np.zeros((4, 3)), np.zeros((5, 3)))


class TestMpjpe:
    """Test PA, WA and FA MPJPE."""

    def test_per_frame_similarity_is_zero_pa(self, rng):
        gt = rng.normal(size=(5, 22, 3))
        pred = np.stack([(1.0 + 0.1 * t) * g @ rz(10 * t).T + t for t, g in enumerate(gt)])
        assert pa_mpjpe(pred, gt) == pytest.approx(0.0, abs=1e-9)

    def test_rigid_trajectory_is_zero_wa_and_fa(self, rng):
        gt = rng.normal(size=(5, 22, 3))
        pred = gt @ rz(40).T + np.array([0.3, -0.2, 1.0])
        assert wa_mpjpe(pred, gt) == pytest.approx(0.0, abs=1e-9)
        assert fa_mpjpe(pred, gt) == pytest.approx(0.0, abs=1e-9)

    def test_fa_offset_after_first_frame(self, rng):
        """Frames 1..T-1 off by 10 mm in x give FA = 10 (T-1)/T mm."""
        num_frames = 6
        gt = rng.normal(size=(num_frames, 22, 3))
        pred = gt.copy()
        pred[1:, :, 0] += 0.010
        assert fa_mpjpe(pred, gt) == pytest.approx(10.0 * (num_frames - 1) / num_frames, abs=1e-6)

    def test_mask_skips_frames(self, rng):
        gt = rng.normal(size=(4, 22, 3))
        pred = gt.copy()
        pred[2] += 1.0
        mask = np.array([True, True, False, True])
        assert wa_mpjpe(pred, gt, mask=mask) == pytest.approx(0.0, abs=1e-9)

    def test_empty_mask(self, rng):
        gt = rng.normal(size=(4, 22, 3))
        with pytest.raises(DomainError):
            pa_mpjpe(gt, gt, np.zeros(4, dtype=bool))

    def test_shape_mismatch(self, rng):
        with pytest.raises(DomainError):
            wa_mpjpe(np.zeros((3, 22, 3)), np.zeros((4, 22, 3)))

    def test_ordering_on_drifting_sequences(self, rng):
        """Per-frame alignment beats whole-sequence alignment, which beats first-frame alignment."""
        for _ in range(50):
            pred, gt = drifting_sequence(rng)
            pa, wa, fa = pa_mpjpe(pred, gt), wa_mpjpe(pred, gt), fa_mpjpe(pred, gt)
            assert pa <= wa + 1e-9
            assert wa <= fa + 1e-9


class TestAccelError:
    """Test accel_error."""

    def test_constant_offset(self, rng):
        gt = rng.normal(size=(6, 22, 3))
        assert accel_error(gt + 0.5, gt) == pytest.approx(0.0, abs=1e-9)

    def test_linear_drift(self, rng):
        gt = rng.normal(size=(6, 22, 3))
        drift = np.arange(6.0)[:, None, None] * np.array([0.01, -0.02, 0.03])
        assert accel_error(gt + drift, gt) == pytest.approx(0.0, abs=1e-9)

    def test_quadratic_drift(self, rng):
        """c·t² on a single joint gives ‖2c‖ at every interior step."""
        gt = rng.normal(size=(5, 1, 3))
        c = np.array([0.001, 0.0, 0.0])
        pred = gt + (np.arange(5.0) ** 2)[:, None, None] * c
        assert accel_error(pred, gt) == pytest.approx(2.0, abs=1e-9)

    def test_needs_three_frames(self, rng):
        gt = rng.normal(size=(2, 22, 3))
        with pytest.raises(DomainError):
            accel_error(gt, gt)

    def test_mask_breaks_runs(self, rng):
        gt = rng.normal(size=(4, 22, 3))
        with pytest.raises(DomainError):
            accel_error(gt, gt, np.array([True, False, True, True]))


class TestAte:
    """Test ate."""

    def setup_method(self):
        self.gt = [
            SE3Pose(np.eye(3), [0.0, 0.0, 0.0]),
            SE3Pose(np.eye(3), [1.0, 0.0, 0.0]),
            SE3Pose(np.eye(3), [0.0, 1.0, 0.0]),
        ]

    def test_identical(self):
        assert ate(self.gt, self.gt) == pytest.approx(0.0, abs=1e-9)

    def test_rigid_transform_absorbed(self):
        g = SE3Pose(rz(25), [0.5, 1.0, -2.0])
        pred = [g.compose(p) for p in self.gt]
        assert ate(pred, self.gt) == pytest.approx(0.0, abs=1e-9)

    def test_scaled_about_centroid(self):
        """Rigid alignment cannot undo a ×2 scale; the residual is the centered gt."""
        positions = np.stack([p.translation for p in self.gt])
        center = positions.mean(axis=0)
        pred = [SE3Pose(np.eye(3), 2.0 * (x - center) + center) for x in positions]
        expected = np.sqrt(np.mean(np.sum((positions - center) ** 2, axis=1))) * 1000.0
        assert ate(pred, self.gt) == pytest.approx(expected, rel=1e-9)
        assert ate(pred, self.gt, align="sim3") == pytest.approx(0.0, abs=1e-9)

    def test_no_alignment(self):
        pred = [SE3Pose(np.eye(3), p.translation + [0.001, 0.0, 0.0]) for p in self.gt]
        assert ate(pred, self.gt, align="none") == pytest.approx(1.0)

    def test_length_mismatch(self):
        with pytest.raises(DomainError):
            ate(self.gt[:2], self.gt)

    def test_unknown_alignment(self):
        with pytest.raises(DomainError):
            ate(self.gt, self.gt, align="affine")


class TestDepthMetrics:
    """Test depth_metrics."""

    def test_identical(self, rng):
        depth = rng.uniform(0.5, 3.0, size=(4, 4))
        result = depth_metrics(depth, depth)
        assert result["delta1"] == 1.0
        assert result["rel"] == 0.0
        assert result["rmse"] == 0.0

    def test_hand_example(self):
        result = depth_metrics(np.array([1.0, 2.0]), np.array([1.0, 1.0]))
        assert result["delta1"] == 0.5
        assert result["rel"] == 0.5
        assert result["rmse"] == pytest.approx(np.sqrt(0.5))

    def test_invalid_pixels_ignored(self):
        result = depth_metrics(np.array([1.0, np.nan, 2.0]), np.array([1.0, 1.0, np.nan]))
        assert result["rmse"] == 0.0

    def test_no_valid_pixels(self):
        with pytest.raises(DomainError):
            depth_metrics(np.array([np.nan]), np.array([1.0]))

    def test_sequence_pools_pixels(self):
        result = depth_metrics_sequence([np.array([[1.0]]), np.array([[2.0]])], [np.ones((1, 1))] * 2)
        assert result["delta1"] == 0.5


class TestTrackMetrics:
    """Test track_metrics and build_report."""

    def test_identical_tracks(self, scenario, template):
        result = track_metrics(scenario.gt_tracks, scenario.gt_tracks, template=template)
        for key in ("pa_mpjpe_mm", "wa_mpjpe_mm", "fa_mpjpe_mm", "accel_mm_f2"):
            assert result[key] == pytest.approx(0.0, abs=1e-6)

    def test_missing_prediction(self, scenario, template):
        with pytest.raises(DomainError):
            track_metrics([], scenario.gt_tracks, template=template)

    def test_missing_frames_masked(self, scenario, template):
        truth = scenario.gt_tracks[0]
        slots = list(truth.slots)
        slots[1] = None
        gappy = BodyTrack(truth.track_id, tuple(slots), "world")
        joints, observed = track_joints(gappy, template)
        assert observed.tolist() == [True, False, True, True]
        assert not joints[1].any()
        result = track_metrics([gappy], [truth], template=template)
        assert result["wa_mpjpe_mm"] == pytest.approx(0.0, abs=1e-6)
        assert "accel_mm_f2" not in result

    def test_joint_metrics_keys(self, rng):
        gt = rng.normal(size=(2, 22, 3))
        assert set(joint_metrics(gt, gt)) == {"pa_mpjpe_mm", "wa_mpjpe_mm", "fa_mpjpe_mm"}

    def test_report_partial(self, scenario):
        report = build_report(pred_traj=scenario.gt_poses, gt_traj=scenario.gt_poses)
        data = report.to_dict()
        assert data["ate_mm"] == pytest.approx(0.0, abs=1e-9)
        assert data["pa_mpjpe_mm"] is None
        assert data["delta1"] is None

    def test_report_depth(self, scenario):
        report = build_report(pred_depths=list(scenario.depth_true), gt_depths=list(scenario.depth_true))
        assert report.delta1 == 1.0
        assert report.rmse_m == 0.0

    def test_config_rejects_alignment(self):
        with pytest.raises(DomainError):
            MetricsConfig(ate_align="affine")
