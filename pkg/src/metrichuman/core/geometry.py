"""Rotation, rigid pose and pinhole camera algebra."""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Optional, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from .error_handler import DomainError

logger = logging.getLogger(__name__)

# Quaternions are stored as (w, x, y, z) everywhere in the package.
QUAT_EPS = 1e-12


def _frozen(array: Any, shape: Optional[Tuple[int, ...]] = None) -> np.ndarray:
    """Copy to a read-only float64 array, optionally checking the shape."""
    out = np.array(array, dtype=np.float64)
    if shape is not None and out.shape != shape:
        raise DomainError(f"Expected shape {shape}, got {out.shape}")
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# Quaternions
# ---------------------------------------------------------------------------


def quat_normalize(q: np.ndarray) -> np.ndarray:
    """Normalize quaternions along the last axis.

    Raises:
        DomainError: If any quaternion has (near) zero norm
    """
    q = np.asarray(q, dtype=np.float64)
    norm = np.linalg.norm(q, axis=-1, keepdims=True)
    if not np.all(np.isfinite(norm)) or np.any(norm < QUAT_EPS):
        raise DomainError("Cannot normalize a zero-norm or non-finite quaternion")
    return q / norm


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a ⊗ b for (..., 4) arrays."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    aw, ax, ay, az = np.moveaxis(a, -1, 0)
    bw, bx, by, bz = np.moveaxis(b, -1, 0)
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Convert (..., 4) quaternions to (..., 3, 3) rotation matrices."""
    q = quat_normalize(q)
    batch_shape = q.shape[:-1]
    if q.size == 0:
        return np.zeros(batch_shape + (3, 3))
    xyzw = q.reshape(-1, 4)[:, [1, 2, 3, 0]]
    return Rotation.from_quat(xyzw).as_matrix().reshape(batch_shape + (3, 3))


def matrix_to_quat(rotation: np.ndarray) -> np.ndarray:
    """Convert (..., 3, 3) rotation matrices to (..., 4) quaternions with w >= 0."""
    rotation = np.asarray(rotation, dtype=np.float64)
    batch_shape = rotation.shape[:-2]
    if rotation.size == 0:
        return np.zeros(batch_shape + (4,))
    xyzw = Rotation.from_matrix(rotation.reshape(-1, 3, 3)).as_quat()
    q = xyzw[:, [3, 0, 1, 2]]
    q = np.where(q[:, :1] < 0.0, -q, q)
    return q.reshape(batch_shape + (4,))


@dataclass(frozen=True)
class UnitQuaternion:
    """Unit quaternion (w, x, y, z), normalized on construction."""

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        q = quat_normalize(np.array([self.w, self.x, self.y, self.z]))
        object.__setattr__(self, "w", float(q[0]))
        object.__setattr__(self, "x", float(q[1]))
        object.__setattr__(self, "y", float(q[2]))
        object.__setattr__(self, "z", float(q[3]))

    @classmethod
    def identity(cls) -> "UnitQuaternion":
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_array(cls, values: Iterable[float]) -> "UnitQuaternion":
        w, x, y, z = (float(v) for v in values)
        return cls(w, x, y, z)

    @classmethod
    def from_matrix(cls, rotation: np.ndarray) -> "UnitQuaternion":
        return cls.from_array(matrix_to_quat(rotation))

    @classmethod
    def from_axis_angle(cls, axis: Iterable[float], angle: float) -> "UnitQuaternion":
        """Build the rotation of `angle` radians about `axis`."""
        axis_arr = np.asarray(list(axis), dtype=np.float64)
        norm = np.linalg.norm(axis_arr)
        if norm < QUAT_EPS:
            raise DomainError("Rotation axis must be non-zero")
        axis_arr = axis_arr / norm
        half = 0.5 * angle
        return cls(float(np.cos(half)), *(float(v) for v in np.sin(half) * axis_arr))

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    def to_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.as_array())

    def conjugate(self) -> "UnitQuaternion":
        return UnitQuaternion(self.w, -self.x, -self.y, -self.z)

    def dot(self, other: "UnitQuaternion") -> float:
        return float(np.dot(self.as_array(), other.as_array()))

    def angle_to(self, other: "UnitQuaternion") -> float:
        """Rotation angle (radians) between the two rotations."""
        d = min(1.0, abs(self.dot(other)))
        return float(2.0 * np.arccos(d))

    def __mul__(self, other: "UnitQuaternion") -> "UnitQuaternion":
        return UnitQuaternion.from_array(quat_multiply(self.as_array(), other.as_array()))


def _orthogonal_axis(v: np.ndarray) -> np.ndarray:
    """Deterministic unit vector orthogonal to v (x axis if v is zero)."""
    norm = np.linalg.norm(v)
    if norm < QUAT_EPS:
        return np.array([1.0, 0.0, 0.0])
    basis = np.eye(3)[int(np.argmin(np.abs(v)))]
    axis = np.cross(v / norm, basis)
    return axis / np.linalg.norm(axis)


def quat_slerp(
    q0: UnitQuaternion, q1: UnitQuaternion, t: float, shortest: bool = True
) -> UnitQuaternion:
    """Constant-speed geodesic interpolation between two unit quaternions.

    Args:
        q0: Start rotation (returned exactly at t = 0)
        q1: End rotation (returned exactly at t = 1)
        t: Interpolation parameter in [0, 1]
        shortest: Flip q1 when the dot product is negative so the path takes
            the shorter arc in rotation space

    Returns:
        Interpolated unit quaternion

    Raises:
        DomainError: If t is outside [0, 1]
    """
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"Slerp parameter must lie in [0, 1], got {t}")
    if t == 0.0:
        return q0
    if t == 1.0:
        return q1

    a = q0.as_array()
    b = q1.as_array()
    dot = float(np.dot(a, b))

    if dot == -1.0 and not shortest:
        # Antipodal pair: the great circle is not unique, so rotate q0 about a
        # fixed axis orthogonal to its vector part; reaches -q0 at t = 1.
        axis = _orthogonal_axis(a[1:])
        step = np.concatenate([[np.cos(np.pi * t)], np.sin(np.pi * t) * axis])
        return UnitQuaternion.from_array(quat_multiply(a, step))

    if shortest and dot < 0.0:
        b = -b
        dot = -dot

    dot = min(1.0, max(-1.0, dot))
    theta = np.arccos(dot)
    if np.sin(theta) < 1e-12:
        return UnitQuaternion.from_array((1.0 - t) * a + t * b)
    w0 = np.sin((1.0 - t) * theta) / np.sin(theta)
    w1 = np.sin(t * theta) / np.sin(theta)
    return UnitQuaternion.from_array(w0 * a + w1 * b)


def random_quaternions(rng: np.random.Generator, count: int) -> np.ndarray:
    """Uniformly distributed random unit quaternions, shape (count, 4), w >= 0."""
    q = quat_normalize(rng.normal(size=(count, 4)))
    return np.where(q[:, :1] < 0.0, -q, q)


# ---------------------------------------------------------------------------
# Rotation matrices and the SO(3) exponential map
# ---------------------------------------------------------------------------


def is_rotation(rotation: np.ndarray, tol: float = 1e-9) -> bool:
    """Check R Rᵀ = I and det R = +1 within tolerance."""
    rotation = np.asarray(rotation, dtype=np.float64)
    if rotation.shape[-2:] != (3, 3) or not np.all(np.isfinite(rotation)):
        return False
    eye = np.broadcast_to(np.eye(3), rotation.shape)
    ortho = np.abs(rotation @ np.swapaxes(rotation, -1, -2) - eye).max()
    return bool(ortho < tol and np.all(np.abs(np.linalg.det(rotation) - 1.0) < tol))


def so3_hat(phi: np.ndarray) -> np.ndarray:
    """Skew-symmetric matrix of a 3-vector, (..., 3) -> (..., 3, 3)."""
    phi = np.asarray(phi, dtype=np.float64)
    zero = np.zeros(phi.shape[:-1])
    x, y, z = phi[..., 0], phi[..., 1], phi[..., 2]
    return np.stack(
        [
            np.stack([zero, -z, y], axis=-1),
            np.stack([z, zero, -x], axis=-1),
            np.stack([-y, x, zero], axis=-1),
        ],
        axis=-2,
    )


def so3_exp(phi: np.ndarray) -> np.ndarray:
    """Rotation matrix of a rotation vector (Rodrigues), (3,) -> (3, 3)."""
    phi = np.asarray(phi, dtype=np.float64)
    return Rotation.from_rotvec(phi).as_matrix()


def so3_log(rotation: np.ndarray) -> np.ndarray:
    """Rotation vector of a rotation matrix (inverse of so3_exp), angle in [0, π]."""
    return Rotation.from_matrix(np.asarray(rotation, dtype=np.float64)).as_rotvec()


def rotation_angle(a: np.ndarray, b: np.ndarray) -> float:
    """Geodesic angle in radians between two rotation matrices."""
    cos = 0.5 * (np.trace(np.asarray(a).T @ np.asarray(b)) - 1.0)
    return float(np.arccos(np.clip(cos, -1.0, 1.0)))


# ---------------------------------------------------------------------------
# Rigid poses
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SE3Pose:
    """Rigid transform x -> R x + t. Camera poses are camera-to-world."""

    rotation: np.ndarray
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        object.__setattr__(self, "rotation", _frozen(self.rotation, (3, 3)))
        object.__setattr__(self, "translation", _frozen(self.translation, (3,)))

    @classmethod
    def identity(cls) -> "SE3Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "SE3Pose":
        matrix = np.asarray(matrix, dtype=np.float64)
        return cls(matrix[:3, :3], matrix[:3, 3])

    @classmethod
    def from_quaternion(
        cls, quaternion: UnitQuaternion, translation: Iterable[float]
    ) -> "SE3Pose":
        return cls(quaternion.to_matrix(), np.asarray(list(translation), dtype=float))

    def as_matrix(self) -> np.ndarray:
        matrix = np.eye(4)
        matrix[:3, :3] = self.rotation
        matrix[:3, 3] = self.translation
        return matrix

    def quaternion(self) -> UnitQuaternion:
        return UnitQuaternion.from_matrix(self.rotation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform (..., 3) points."""
        points = np.asarray(points, dtype=np.float64)
        return points @ self.rotation.T + self.translation

    def compose(self, other: "SE3Pose") -> "SE3Pose":
        return se3_compose(self, other)

    def inverse(self) -> "SE3Pose":
        return se3_inverse(self)


def se3_compose(a: SE3Pose, b: SE3Pose) -> SE3Pose:
    """a ∘ b: apply b first, then a."""
    return SE3Pose(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def se3_inverse(a: SE3Pose) -> SE3Pose:
    rt = a.rotation.T
    return SE3Pose(rt, -rt @ a.translation)


def relative_pose(gi: SE3Pose, gj: SE3Pose) -> SE3Pose:
    """G_ij = G_j ∘ G_i⁻¹."""
    return se3_compose(gj, se3_inverse(gi))


# ---------------------------------------------------------------------------
# Pinhole camera
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self) -> None:
        if not (self.fx > 0 and self.fy > 0):
            raise DomainError(f"Focal lengths must be positive: {self.fx}, {self.fy}")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise DomainError(
                f"Principal point ({self.cx}, {self.cy}) outside "
                f"{self.width}x{self.height} image"
            )

    @classmethod
    def from_image_size(cls, width: int, height: int) -> "Intrinsics":
        """Default camera: f = (W + H) / 2, principal point at the image center."""
        focal = 0.5 * (width + height)
        return cls(focal, focal, 0.5 * width, 0.5 * height, int(width), int(height))

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Intrinsics":
        return cls(
            float(data["fx"]),
            float(data["fy"]),
            float(data["cx"]),
            float(data["cy"]),
            int(data["width"]),
            int(data["height"]),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.width,
            "height": self.height,
        }

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    @property
    def shape(self) -> Tuple[int, int]:
        return self.height, self.width


def project(intr: Intrinsics, point: np.ndarray) -> np.ndarray:
    """Project a camera-frame point to pixel coordinates.

    Raises:
        DomainError: If the point is not in front of the camera
    """
    x, y, z = (float(v) for v in point)
    if not z > 0:
        raise DomainError(f"Cannot project point with non-positive depth z={z}")
    return np.array([intr.fx * x / z + intr.cx, intr.fy * y / z + intr.cy])


def project_points(intr: Intrinsics, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized projection of (N, 3) points.

    Returns:
        Tuple of (pixels (N, 2), valid (N,)) where invalid rows (z <= 0) are NaN
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    z = points[:, 2]
    valid = z > 0
    safe_z = np.where(valid, z, 1.0)
    uv = np.stack(
        [
            intr.fx * points[:, 0] / safe_z + intr.cx,
            intr.fy * points[:, 1] / safe_z + intr.cy,
        ],
        axis=-1,
    )
    uv[~valid] = np.nan
    return uv, valid


def unproject(intr: Intrinsics, pixel: np.ndarray, depth: float) -> np.ndarray:
    """Lift a pixel with metric depth to a camera-frame point.

    Raises:
        DomainError: If depth is not a positive number
    """
    if not depth > 0:
        raise DomainError(f"Cannot unproject with depth {depth}")
    u, v = (float(c) for c in pixel)
    return np.array(
        [(u - intr.cx) * depth / intr.fx, (v - intr.cy) * depth / intr.fy, depth]
    )


def unproject_points(
    intr: Intrinsics, pixels: np.ndarray, depths: np.ndarray
) -> np.ndarray:
    """Vectorized unprojection; rows with invalid depth become NaN."""
    pixels = np.asarray(pixels, dtype=np.float64).reshape(-1, 2)
    depths = np.asarray(depths, dtype=np.float64).reshape(-1)
    z = np.where(depths > 0, depths, np.nan)
    return np.stack(
        [
            (pixels[:, 0] - intr.cx) * z / intr.fx,
            (pixels[:, 1] - intr.cy) * z / intr.fy,
            z,
        ],
        axis=-1,
    )


def pixel_grid(height: int, width: int) -> np.ndarray:
    """(H, W, 2) array of pixel-center coordinates (u = column, v = row)."""
    v, u = np.meshgrid(np.arange(height, dtype=float), np.arange(width, dtype=float), indexing="ij")
    return np.stack([u, v], axis=-1)


def unproject_depth(intr: Intrinsics, depth: np.ndarray) -> np.ndarray:
    """Unproject a whole depth map to an (H, W, 3) point grid (NaN where invalid)."""
    depth = np.asarray(depth, dtype=np.float64)
    grid = pixel_grid(*depth.shape)
    return unproject_points(intr, grid.reshape(-1, 2), depth.reshape(-1)).reshape(
        depth.shape + (3,)
    )


# ---------------------------------------------------------------------------
# Depth maps, masks and point clouds
# ---------------------------------------------------------------------------


def validate_depth_map(depth: np.ndarray) -> np.ndarray:
    """Check a depth map: 2-D, NaN or strictly positive everywhere.

    Raises:
        DomainError: If a valid cell is non-positive or infinite
    """
    depth = np.asarray(depth, dtype=np.float64)
    if depth.ndim != 2:
        raise DomainError(f"Depth map must be 2-D, got shape {depth.shape}")
    valid = ~np.isnan(depth)
    if np.any(~np.isfinite(depth[valid])) or np.any(depth[valid] <= 0):
        raise DomainError("Depth map has non-positive or infinite valid cells")
    return depth


def validate_instance_mask(mask: np.ndarray, num_instances: Optional[int] = None) -> np.ndarray:
    """Check an instance mask holds ids in {0..N}.

    Raises:
        DomainError: If ids are negative or exceed the instance count
    """
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise DomainError(f"Instance mask must be 2-D, got shape {mask.shape}")
    if mask.size and mask.min() < 0:
        raise DomainError("Instance ids must be non-negative")
    if num_instances is not None and mask.size and mask.max() > num_instances:
        raise DomainError(
            f"Instance id {int(mask.max())} exceeds instance count {num_instances}"
        )
    return mask.astype(np.uint8)


def union_mask(mask: np.ndarray) -> np.ndarray:
    """Collapse an instance mask to the boolean union of all humans."""
    return np.asarray(mask) > 0


@dataclass(frozen=True)
class PointCloud:
    """Colored point cloud with a per-point human flag (7 channels).

    `source` optionally records (frame, anchor index) for points lifted from
    bundle adjustment anchors.
    """

    xyz: np.ndarray
    rgb: np.ndarray
    human: np.ndarray
    source: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        xyz = _frozen(np.asarray(self.xyz, dtype=float).reshape(-1, 3))
        rgb = _frozen(np.asarray(self.rgb, dtype=float).reshape(-1, 3))
        human = _frozen(np.asarray(self.human, dtype=float).reshape(-1))
        if not (len(xyz) == len(rgb) == len(human)):
            raise DomainError(
                f"Point cloud channel lengths differ: {len(xyz)}, {len(rgb)}, {len(human)}"
            )
        object.__setattr__(self, "xyz", xyz)
        object.__setattr__(self, "rgb", rgb)
        object.__setattr__(self, "human", human)
        if self.source is not None:
            source = np.asarray(self.source, dtype=np.int64).reshape(-1, 2)
            if len(source) != len(xyz):
                raise DomainError("Point cloud source index length mismatch")
            source.setflags(write=False)
            object.__setattr__(self, "source", source)

    @classmethod
    def empty(cls) -> "PointCloud":
        return cls(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0))

    def __len__(self) -> int:
        return int(self.xyz.shape[0])

    def features(self) -> np.ndarray:
        """(L, 7) matrix [x y z r g b human]."""
        return np.concatenate([self.xyz, self.rgb, self.human[:, None]], axis=1)

    def select(self, keep: np.ndarray) -> "PointCloud":
        keep = np.asarray(keep, dtype=bool)
        return PointCloud(
            self.xyz[keep],
            self.rgb[keep],
            self.human[keep],
            None if self.source is None else self.source[keep],
        )
