"""Tests for quaternions, rigid poses and the pinhole camera."""

import numpy as np
import pytest

from metrichuman.core.error_handler import DomainError
from metrichuman.core.geometry import (
    Intrinsics,
    PointCloud,
    SE3Pose,
    UnitQuaternion,
    is_rotation,
    matrix_to_quat,
    pixel_grid,
    project,
    project_points,
    quat_multiply,
    quat_normalize,
    quat_slerp,
    quat_to_matrix,
    random_quaternions,
    relative_pose,
    rotation_angle,
    se3_compose,
    se3_inverse,
    so3_exp,
    so3_hat,
    so3_log,
    unproject,
    unproject_depth,
    unproject_points,
    validate_depth_map,
    validate_instance_mask,
)


def random_pose(rng):
    return SE3Pose(so3_exp(rng.normal(size=3)), rng.normal(size=3))


class TestQuaternions:
    """Test quaternion helpers and UnitQuaternion."""

    def test_normalize_rejects_zero(self):
        """A zero quaternion is never silently normalized."""
        with pytest.raises(DomainError):
            quat_normalize(np.zeros(4))

    def test_unit_quaternion_normalizes(self):
        q = UnitQuaternion(2.0, 0.0, 0.0, 0.0)
        assert q.w == 1.0

    def test_multiply_identity(self, rng):
        q = random_quaternions(rng, 5)
        out = quat_multiply(np.array([1.0, 0.0, 0.0, 0.0]), q)
        np.testing.assert_allclose(out, q)

    def test_matrix_round_trip(self, rng):
        """R -> q -> R recovers the rotation for many random rotations."""
        q = random_quaternions(rng, 10_000)
        rotations = quat_to_matrix(q)
        back = quat_to_matrix(matrix_to_quat(rotations))
        assert np.abs(back - rotations).max() < 1e-9

    def test_matrix_to_quat_positive_w(self, rng):
        q = matrix_to_quat(quat_to_matrix(-random_quaternions(rng, 100)))
        assert np.all(q[:, 0] >= 0)

    def test_scalar_first_order(self):
        """(w, x, y, z) = (cos 45°, 0, 0, sin 45°) is a quarter turn about z."""
        half = np.sqrt(0.5)
        rotation = quat_to_matrix(np.array([half, 0.0, 0.0, half]))
        np.testing.assert_allclose(rotation, [[0, -1, 0], [1, 0, 0], [0, 0, 1]], atol=1e-12)
        np.testing.assert_allclose(matrix_to_quat(rotation), [half, 0.0, 0.0, half], atol=1e-12)

    def test_batch_shapes(self, rng):
        q = random_quaternions(rng, 6).reshape(2, 3, 4)
        assert quat_to_matrix(q).shape == (2, 3, 3, 3)
        np.testing.assert_allclose(matrix_to_quat(quat_to_matrix(q)), q, atol=1e-12)
        assert matrix_to_quat(np.zeros((0, 3, 3))).shape == (0, 4)

    def test_matches_hamilton_product(self, rng):
        a, b = random_quaternions(rng, 2)
        product = quat_to_matrix(quat_multiply(a, b))
        np.testing.assert_allclose(product, quat_to_matrix(a) @ quat_to_matrix(b), atol=1e-12)

    def test_axis_angle(self):
        q = UnitQuaternion.from_axis_angle([0, 0, 1], np.pi / 2)
        np.testing.assert_allclose(q.to_matrix() @ [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], atol=1e-12)

    def test_axis_angle_zero_axis(self):
        with pytest.raises(DomainError):
            UnitQuaternion.from_axis_angle([0, 0, 0], 1.0)

    def test_angle_to_double_cover(self):
        q = UnitQuaternion.from_axis_angle([1, 0, 0], 0.3)
        neg = UnitQuaternion.from_array(-q.as_array())
        assert q.angle_to(neg) == pytest.approx(0.0, abs=1e-7)


class TestSlerp:
    """Test quat_slerp."""

    def test_same_quaternion(self):
        q = UnitQuaternion.from_axis_angle([1, 2, 3], 0.7)
        np.testing.assert_allclose(quat_slerp(q, q, 0.5).as_array(), q.as_array(), atol=1e-12)

    def test_midpoint_about_z(self):
        """Identity to 90 degrees about z gives 45 degrees at t = 0.5."""
        q90 = UnitQuaternion.from_axis_angle([0, 0, 1], np.pi / 2)
        mid = quat_slerp(UnitQuaternion.identity(), q90, 0.5)
        expected = UnitQuaternion.from_axis_angle([0, 0, 1], np.pi / 4)
        np.testing.assert_allclose(mid.as_array(), expected.as_array(), atol=1e-12)

    def test_endpoints_exact(self, rng):
        a, b = (UnitQuaternion.from_array(q) for q in random_quaternions(rng, 2))
        assert quat_slerp(a, b, 0.0) == a
        assert quat_slerp(a, b, 1.0) == b

    @pytest.mark.parametrize("t", [-0.1, 1.5])
    def test_parameter_out_of_range(self, t):
        with pytest.raises(DomainError):
            quat_slerp(UnitQuaternion.identity(), UnitQuaternion.identity(), t)

    def test_shortest_arc(self):
        """A negated end quaternion is the same rotation, so the path stays short."""
        q = UnitQuaternion.from_axis_angle([0, 1, 0], 0.4)
        neg = UnitQuaternion.from_array(-q.as_array())
        mid = quat_slerp(UnitQuaternion.identity(), neg, 0.5)
        assert mid.angle_to(UnitQuaternion.identity()) == pytest.approx(0.2, abs=1e-9)

    def test_antipodal_fallback(self):
        """Antipodal input without shortest-arc flipping stays well defined."""
        q = UnitQuaternion.identity()
        neg = UnitQuaternion.from_array(-q.as_array())
        mid = quat_slerp(q, neg, 0.5, shortest=False)
        assert np.isfinite(mid.as_array()).all()
        assert np.linalg.norm(mid.as_array()) == pytest.approx(1.0)
        assert abs(mid.dot(q)) < 1e-12

    def test_constant_speed(self, rng):
        a, b = (UnitQuaternion.from_array(q) for q in random_quaternions(rng, 2))
        total = a.angle_to(b)
        quarter = quat_slerp(a, b, 0.25)
        assert a.angle_to(quarter) == pytest.approx(0.25 * total, abs=1e-9)


class TestSO3:
    """Test the exponential and logarithm maps."""

    def test_exp_log_round_trip(self, rng):
        for phi in rng.normal(scale=0.5, size=(50, 3)):
            np.testing.assert_allclose(so3_log(so3_exp(phi)), phi, atol=1e-9)

    def test_exp_is_rotation(self, rng):
        assert is_rotation(so3_exp(rng.normal(size=3)))

    def test_exp_matches_rodrigues(self, rng):
        for phi in rng.normal(size=(10, 3)):
            angle = np.linalg.norm(phi)
            k = so3_hat(phi / angle)
            expected = np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * k @ k
            np.testing.assert_allclose(so3_exp(phi), expected, atol=1e-12)

    def test_log_angle_at_most_pi(self, rng):
        for q in random_quaternions(rng, 50):
            assert np.linalg.norm(so3_log(quat_to_matrix(q))) <= np.pi + 1e-12

    def test_small_angle(self):
        assert is_rotation(so3_exp(np.array([1e-10, 0.0, 0.0])))

    def test_is_rotation_rejects_reflection(self):
        assert not is_rotation(np.diag([1.0, 1.0, -1.0]))

    def test_rotation_angle(self):
        r = so3_exp(np.array([0.0, 0.0, 0.3]))
        assert rotation_angle(np.eye(3), r) == pytest.approx(0.3)


class TestSE3:
    """Test rigid pose composition."""

    def test_relative_pose_of_same_pose(self, rng):
        g = random_pose(rng)
        rel = relative_pose(g, g)
        np.testing.assert_allclose(rel.as_matrix(), np.eye(4), atol=1e-12)

    def test_inverse(self, rng):
        g = random_pose(rng)
        np.testing.assert_allclose(se3_compose(g, se3_inverse(g)).as_matrix(), np.eye(4), atol=1e-12)

    def test_compose_order(self, rng):
        """a ∘ b applies b first."""
        a, b = random_pose(rng), random_pose(rng)
        x = rng.normal(size=3)
        np.testing.assert_allclose(a.compose(b).apply(x), a.apply(b.apply(x)))

    def test_relative_pose_maps_between_frames(self, rng):
        gi, gj = random_pose(rng), random_pose(rng)
        x = rng.normal(size=3)
        np.testing.assert_allclose(relative_pose(gi, gj).apply(gi.apply(x)), gj.apply(x))

    def test_matrix_round_trip(self, rng):
        g = random_pose(rng)
        back = SE3Pose.from_matrix(g.as_matrix())
        np.testing.assert_array_equal(back.rotation, g.rotation)

    def test_arrays_are_read_only(self):
        g = SE3Pose.identity()
        with pytest.raises(ValueError):
            g.translation[0] = 1.0

    def test_bad_shape(self):
        with pytest.raises(DomainError):
            SE3Pose(np.eye(2))


class TestCamera:
    """Test projection and unprojection."""

    def test_principal_ray(self, intr):
        np.testing.assert_allclose(project(intr, np.array([0.0, 0.0, 1.0])), [50.0, 50.0])

    def test_project_offset(self, intr):
        np.testing.assert_allclose(project(intr, np.array([0.5, 0.0, 1.0])), [100.0, 50.0])

    def test_project_behind(self, intr):
        with pytest.raises(DomainError):
            project(intr, np.array([0.0, 0.0, -1.0]))

    def test_unproject(self, intr):
        np.testing.assert_allclose(unproject(intr, np.array([50.0, 50.0]), 2.0), [0.0, 0.0, 2.0])

    @pytest.mark.parametrize("depth", [0.0, -1.0, float("nan")])
    def test_unproject_invalid_depth(self, intr, depth):
        with pytest.raises(DomainError):
            unproject(intr, np.array([10.0, 10.0]), depth)

    def test_round_trip(self, intr, rng):
        pixels = rng.uniform(0, 100, size=(20, 2))
        depths = rng.uniform(0.5, 5.0, size=20)
        uv, valid = project_points(intr, unproject_points(intr, pixels, depths))
        assert valid.all()
        np.testing.assert_allclose(uv, pixels, atol=1e-9)

    def test_project_points_marks_invalid(self, intr):
        uv, valid = project_points(intr, np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]]))
        assert valid.tolist() == [True, False]
        assert np.isnan(uv[1]).all()

    def test_unproject_points_nan_for_invalid_depth(self, intr):
        points = unproject_points(intr, np.array([[1.0, 1.0], [2.0, 2.0]]), np.array([np.nan, 1.0]))
        assert np.isnan(points[0]).all()
        assert np.isfinite(points[1]).all()

    def test_pixel_grid_order(self):
        grid = pixel_grid(2, 3)
        assert grid.shape == (2, 3, 2)
        np.testing.assert_array_equal(grid[1, 2], [2.0, 1.0])

    def test_unproject_depth(self, intr):
        points = unproject_depth(intr, np.full((100, 100), 2.0))
        np.testing.assert_allclose(points[50, 50], [0.0, 0.0, 2.0])

    def test_from_image_size(self):
        intr = Intrinsics.from_image_size(64, 48)
        assert intr.fx == intr.fy == 56.0
        assert (intr.cx, intr.cy) == (32.0, 24.0)
        assert intr.shape == (48, 64)

    def test_principal_point_outside(self):
        with pytest.raises(DomainError):
            Intrinsics(100.0, 100.0, 150.0, 50.0, 100, 100)

    def test_dict_round_trip(self, intr):
        assert Intrinsics.from_dict(intr.to_dict()) == intr


class TestValidation:
    """Test depth and mask validation."""

    def test_depth_allows_nan(self):
        depth = np.array([[1.0, np.nan]])
        assert validate_depth_map(depth).shape == (1, 2)

    @pytest.mark.parametrize("bad", [0.0, -1.0, np.inf])
    def test_depth_rejects(self, bad):
        with pytest.raises(DomainError):
            validate_depth_map(np.array([[1.0, bad]]))

    def test_mask_bound(self):
        with pytest.raises(DomainError):
            validate_instance_mask(np.array([[0, 3]]), num_instances=2)

    def test_mask_dtype(self):
        assert validate_instance_mask(np.array([[0, 1]]), 1).dtype == np.uint8


class TestPointCloud:
    """Test PointCloud."""

    def test_features(self):
        cloud = PointCloud(np.ones((2, 3)), np.zeros((2, 3)), np.array([0.0, 1.0]))
        features = cloud.features()
        assert features.shape == (2, 7)
        assert features[1, 6] == 1.0

    def test_empty(self):
        assert len(PointCloud.empty()) == 0
        assert PointCloud.empty().features().shape == (0, 7)

    def test_length_mismatch(self):
        with pytest.raises(DomainError):
            PointCloud(np.ones((2, 3)), np.zeros((3, 3)), np.zeros(2))

    def test_select_keeps_source(self):
        cloud = PointCloud(
            np.arange(6.0).reshape(2, 3), np.zeros((2, 3)), np.zeros(2), source=[[0, 0], [0, 1]]
        )
        kept = cloud.select(np.array([False, True]))
        assert len(kept) == 1
        assert kept.source.tolist() == [[0, 1]]
