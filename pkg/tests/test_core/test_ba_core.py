"""Tests for masked bundle adjustment and world point lifting."""

import numpy as np
import pytest

from metrichuman.core.ba_core import (
    BAProblem,
    FramePairObservation,
    SolverConfig,
    anchor_colors,
    anchor_human_flags,
    cost,
    filter_epipolar,
    initial_inv_depths,
    lift_world_points,
    mask_confidence,
    predict_correspondence,
    reprojection_errors,
    residuals_and_jacobian,
    retract,
    sample_depth,
    solve,
)
from metrichuman.core.error_handler import DomainError
from metrichuman.core.geometry import PointCloud, SE3Pose, rotation_angle, so3_exp


def two_frame_problem(intr, target=(51.0, 51.0), confidence=(1.0, 1.0)):
    anchors = np.array([[50.0, 50.0]])
    obs = FramePairObservation(
        i=0, j=1, pixels=anchors, targets=np.array([target]), confidence=np.array([confidence])
    )
    return BAProblem(
        intr=intr,
        poses=(SE3Pose.identity(), SE3Pose.identity()),
        inv_depths=(np.array([0.5]), np.array([0.5])),
        anchors=(anchors, anchors),
        observations=(obs,),
    )


def gt_problem(scenario):
    """Problem initialized exactly at the generator's poses and depths."""
    return scenario.ba_problem(perturb=False).replace(inv_depths=scenario.gt_inv_depths())


def lifted_truth(scenario):
    return lift_world_points(
        scenario.gt_poses,
        scenario.gt_inv_depths(),
        scenario.anchors,
        scenario.intr,
        scenario.anchor_colors(),
        scenario.anchor_human_flags(),
    )


def numeric_jacobian(problem, eps=1e-6):
    """Central differences of the residual along each retraction direction."""
    size = residuals_and_jacobian(problem)[1].shape[1]
    columns = []
    for k in range(size):
        step = np.zeros(size)
        step[k] = eps
        plus = residuals_and_jacobian(problem, *retract(problem, problem.poses, problem.inv_depths, step))[0]
        minus = residuals_and_jacobian(problem, *retract(problem, problem.poses, problem.inv_depths, -step))[0]
        columns.append((plus - minus) / (2 * eps))
    return np.stack(columns, axis=-1)


def max_relative_error(analytic, numeric):
    return float(np.max(np.abs(analytic - numeric) / np.maximum(1.0, np.abs(numeric))))


class TestPredictCorrespondence:
    """Test predict_correspondence."""

    def test_identity_motion(self, intr, rng):
        pose = SE3Pose(np.eye(3), rng.normal(size=3))
        uv, valid = predict_correspondence(pose, pose, intr, np.array([12.0, 34.0]), 0.7)
        assert valid
        np.testing.assert_allclose(uv, [12.0, 34.0], atol=1e-9)

    def test_forward_motion_halves_depth(self, intr):
        """Depth 2 to 1 doubles the offset from the principal point."""
        gj = SE3Pose(np.eye(3), [0.0, 0.0, 1.0])
        uv, valid = predict_correspondence(SE3Pose.identity(), gj, intr, np.array([60.0, 50.0]), 0.5)
        assert valid
        np.testing.assert_allclose(uv, [70.0, 50.0], atol=1e-12)

    def test_behind_camera(self, intr):
        gj = SE3Pose(np.eye(3), [0.0, 0.0, 3.0])
        _, valid = predict_correspondence(SE3Pose.identity(), gj, intr, np.array([50.0, 50.0]), 0.5)
        assert not valid

    def test_non_positive_inverse_depth(self, intr):
        with pytest.raises(DomainError):
            predict_correspondence(SE3Pose.identity(), SE3Pose.identity(), intr, np.zeros(2), 0.0)


class TestMaskConfidence:
    """Test mask_confidence."""

    def setup_method(self):
        self.pixels = np.array([[1.0, 1.0], [2.0, 3.0]])
        self.targets = np.array([[2.0, 2.0], [0.0, 0.0]])
        self.w = np.array([[1.0, 0.5], [0.2, 1.0]])

    def test_empty_masks(self):
        empty = np.zeros((4, 4), dtype=bool)
        out = mask_confidence(self.w, empty, empty, self.pixels, self.targets)
        np.testing.assert_array_equal(out, self.w)

    def test_full_source_mask(self):
        full = np.ones((4, 4), dtype=bool)
        out = mask_confidence(self.w, full, np.zeros((4, 4), dtype=bool), self.pixels, self.targets)
        assert not out.any()

    def test_target_in_mask(self):
        mask_j = np.zeros((4, 4), dtype=bool)
        mask_j[0, 0] = True
        out = mask_confidence(self.w, np.zeros((4, 4), dtype=bool), mask_j, self.pixels, self.targets)
        np.testing.assert_array_equal(out, [[1.0, 0.5], [0.0, 0.0]])

    def test_input_not_modified(self):
        full = np.ones((4, 4), dtype=bool)
        mask_confidence(self.w, full, full, self.pixels, self.targets)
        assert self.w[0, 0] == 1.0


class TestCost:
    """Test the bundle adjustment cost."""

    def test_single_residual(self, intr):
        assert cost(two_frame_problem(intr)) == pytest.approx(2.0)

    def test_confidence_weights_squared_residual(self, intr):
        assert cost(two_frame_problem(intr, confidence=(0.5, 0.0))) == pytest.approx(0.5)

    def test_ground_truth_is_zero(self, scenario):
        assert cost(gt_problem(scenario)) < 1e-18

    def test_prior_term(self, intr):
        problem = two_frame_problem(intr, target=(50.0, 50.0)).replace(
            prior_depths=(np.full(intr.shape, 4.0), None), depth_weight=2.0
        )
        # (0.5 - 0.25)² · 2
        assert cost(problem) == pytest.approx(0.125)

    def test_prior_skips_masked_anchors(self, intr):
        masks = (np.ones(intr.shape, dtype=bool), np.zeros(intr.shape, dtype=bool))
        problem = two_frame_problem(intr, target=(50.0, 50.0)).replace(
            prior_depths=(np.full(intr.shape, 4.0), None), union_masks=masks
        )
        assert cost(problem) == 0.0


class TestJacobian:
    """Test the analytic Jacobian against central differences of the retraction."""

    def test_matches_finite_differences(self, scenario):
        problem = scenario.ba_problem()
        residual, jacobian = residuals_and_jacobian(problem)
        numeric = numeric_jacobian(problem)
        assert residual.shape[0] == jacobian.shape[0]
        assert max_relative_error(jacobian, numeric) < 1e-4

    def test_random_pose_depth_pixel(self, intr, rng):
        """Fifty random (pose, inverse depth, pixel) tuples, 1e-5 relative."""
        for _ in range(50):
            anchor = rng.uniform(20.0, 80.0, size=(1, 2))
            pose = SE3Pose(so3_exp(rng.normal(scale=0.1, size=3)), rng.normal(scale=0.1, size=3))
            obs = FramePairObservation(
                i=0,
                j=1,
                pixels=anchor,
                targets=anchor + rng.normal(scale=2.0, size=(1, 2)),
                confidence=rng.uniform(0.5, 1.0, size=(1, 2)),
            )
            problem = BAProblem(
                intr=intr,
                poses=(SE3Pose.identity(), pose),
                inv_depths=(rng.uniform(0.2, 1.0, size=1), rng.uniform(0.2, 1.0, size=1)),
                anchors=(anchor, anchor),
                observations=(obs,),
            )
            jacobian = residuals_and_jacobian(problem)[1]
            assert max_relative_error(jacobian, numeric_jacobian(problem)) < 1e-5


class TestSolve:
    """Test the damped Gauss-Newton solver."""

    def test_ground_truth_start(self, scenario):
        problem = gt_problem(scenario)
        solution = solve(problem)
        assert solution.converged
        assert solution.iterations <= 1
        for before, after in zip(problem.poses, solution.poses):
            np.testing.assert_allclose(after.as_matrix(), before.as_matrix(), atol=1e-10)

    def test_recovers_perturbed_poses(self, scenario):
        """Noise-free correspondences pin the poses down to 1e-6."""
        solution = solve(scenario.ba_problem())
        assert solution.converged
        for estimate, truth in zip(solution.poses, scenario.gt_poses):
            assert rotation_angle(estimate.rotation, truth.rotation) < 1e-6
            assert np.linalg.norm(estimate.translation - truth.translation) < 1e-6

    def test_cost_trace_monotone(self, scenario):
        solution = solve(scenario.ba_problem())
        assert np.all(np.diff(solution.cost_trace) <= 0)
        assert solution.cost_trace[-1] < solution.cost_trace[0]

    def test_first_pose_fixed(self, scenario):
        solution = solve(scenario.ba_problem())
        np.testing.assert_array_equal(solution.poses[0].as_matrix(), scenario.gt_poses[0].as_matrix())

    def test_damping_limit_reports_non_convergence(self, scenario):
        config = SolverConfig(damping_init=1.0, damping_max=0.5)
        solution = solve(scenario.ba_problem(), config)
        assert not solution.converged
        assert len(solution.cost_trace) == 1
        assert solution.diagnostics["optimizer"] == "levenberg"

    def test_needs_two_frames(self, intr):
        anchors = np.array([[50.0, 50.0]])
        problem = BAProblem(intr, (SE3Pose.identity(),), (np.array([0.5]),), (anchors,), ())
        with pytest.raises(DomainError):
            solve(problem)


class TestLiftAndFilter:
    """Test world point lifting and the epipolar filter."""

    def test_lift_principal_point(self, intr):
        cloud = lift_world_points(
            [SE3Pose.identity()], [np.array([0.5])], [np.array([[50.0, 50.0]])], intr,
            [np.array([[1.0, 0.0, 0.0]])], [np.array([1.0])],
        )
        np.testing.assert_allclose(cloud.xyz, [[0.0, 0.0, 2.0]])
        assert cloud.source.tolist() == [[0, 0]]
        assert cloud.human.tolist() == [1.0]

    def test_lift_matches_static_scene(self, scenario):
        cloud = lifted_truth(scenario)
        flags = np.concatenate(scenario.anchor_human_flags())
        assert len(cloud) == scenario.num_frames * scenario.config.anchors_per_frame
        np.testing.assert_array_equal(cloud.human, flags)

    def test_noise_free_keeps_everything(self, scenario):
        cloud = lifted_truth(scenario)
        kept = filter_epipolar(cloud, scenario.gt_poses, scenario.intr, scenario.observations, 2.0)
        assert len(kept) == len(cloud)

    def test_displaced_point_dropped(self, scenario):
        """A 10 px outlier in one view removes exactly that point."""
        observations = list(scenario.observations)
        obs = observations[0]
        k = int(np.nonzero(obs.confidence[:, 0] > 0)[0][0])
        targets = np.array(obs.targets)
        targets[k, 0] += 10.0
        observations[0] = FramePairObservation(obs.i, obs.j, obs.pixels, targets, obs.confidence)

        cloud = lifted_truth(scenario)
        errors = reprojection_errors(cloud, scenario.gt_poses, scenario.intr, observations)
        kept = filter_epipolar(cloud, scenario.gt_poses, scenario.intr, observations, 2.0)
        assert len(kept) == len(cloud) - 1
        assert [obs.i, k] not in kept.source.tolist()
        assert errors.max() == pytest.approx(10.0, abs=1e-6)

    def test_filter_needs_source(self, intr):
        cloud = PointCloud(np.zeros((1, 3)), np.zeros((1, 3)), np.zeros(1))
        with pytest.raises(DomainError):
            filter_epipolar(cloud, [SE3Pose.identity()], intr, [], 2.0)

    def test_filter_bad_threshold(self, scenario):
        with pytest.raises(DomainError):
            filter_epipolar(lifted_truth(scenario), scenario.gt_poses, scenario.intr, [], 0.0)


class TestInputs:
    """Test problem validation and initialization helpers."""

    def test_observation_same_frame(self):
        with pytest.raises(DomainError):
            FramePairObservation(1, 1, np.zeros((1, 2)), np.zeros((1, 2)), np.ones((1, 2)))

    def test_observation_negative_confidence(self):
        with pytest.raises(DomainError):
            FramePairObservation(0, 1, np.zeros((1, 2)), np.zeros((1, 2)), -np.ones((1, 2)))

    def test_observation_pixels_must_match_anchors(self, intr):
        problem = two_frame_problem(intr)
        with pytest.raises(DomainError):
            problem.replace(anchors=(np.array([[10.0, 10.0]]), np.array([[10.0, 10.0]])))

    def test_anchor_outside_image(self, intr):
        problem = two_frame_problem(intr)
        outside = np.array([[150.0, 10.0]])
        with pytest.raises(DomainError):
            problem.replace(anchors=(problem.anchors[0], outside))

    def test_initial_inv_depths(self):
        prior = np.array([[2.0, np.nan], [4.0, 8.0]])
        anchors = np.array([[0.0, 0.0], [1.0, 0.0]])
        first, second = initial_inv_depths([prior, None], [anchors, anchors])
        np.testing.assert_allclose(first, [0.5, 0.25])
        np.testing.assert_array_equal(second, [0.25, 0.25])

    def test_sample_depth_outside(self):
        out = sample_depth(np.ones((2, 2)), np.array([[5.0, 0.0]]))
        assert np.isnan(out[0])

    def test_lookups_round_to_nearest_pixel(self):
        """A fractional anchor reads the same pixel for masks, colors and depth."""
        mask = np.zeros((4, 4), dtype=np.uint8)
        mask[2, 2] = 1
        rgb = np.zeros((4, 4, 3), dtype=np.uint8)
        rgb[2, 2] = 255
        depth = np.ones((4, 4))
        depth[2, 2] = 3.0
        anchors = np.array([[1.6, 1.7], [1.4, 1.4]])

        flags = anchor_human_flags([mask], [anchors])[0]
        colors = anchor_colors([rgb], [anchors])[0]
        confidence = mask_confidence(np.ones((2, 2)), mask, np.zeros_like(mask), anchors, anchors)

        np.testing.assert_array_equal(flags, [1.0, 0.0])
        np.testing.assert_array_equal(colors[:, 0], [1.0, 0.0])
        np.testing.assert_array_equal(confidence[:, 0], [0.0, 1.0])
        np.testing.assert_array_equal(sample_depth(depth, anchors), [3.0, 1.0])
