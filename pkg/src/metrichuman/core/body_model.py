"""Procedural parametric body: shape blend, kinematic chain and pelvis-centered posing.

The body has 22 joints in the usual SMPL body order and 10 vertices per joint
(220 vertices). Every vertex is rigidly attached to one joint. Posing follows

    V = Φ (V_posed − c) + c + Γ

with c the shaped pelvis, so that a camera-to-world change of the parameters is
exactly a rigid transform of the mesh.
"""

import logging
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .error_handler import DomainError, FormatError
from .geometry import SE3Pose, is_rotation

logger = logging.getLogger(__name__)

NUM_JOINTS = 22
NUM_BETAS = 10
VERTICES_PER_PART = 10
# The template data: build_template(TEMPLATE_SEED) is the shipped body model.
TEMPLATE_SEED = 20240607
TEMPLATE_FORMAT = "metrichuman-body-template"

JOINT_NAMES = (
    "pelvis",
    "left_hip",
    "right_hip",
    "spine1",
    "left_knee",
    "right_knee",
    "spine2",
    "left_ankle",
    "right_ankle",
    "spine3",
    "left_foot",
    "right_foot",
    "neck",
    "left_collar",
    "right_collar",
    "head",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
)

JOINT_PARENTS = (-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19)

# Rest joint positions relative to the pelvis, meters, camera-style axes
# (x right, y down, z forward).
_REST_JOINTS = np.array(
    [
        [0.00, 0.00, 0.00],
        [0.06, 0.09, 0.00],
        [-0.06, 0.09, 0.00],
        [0.00, -0.11, 0.00],
        [0.10, 0.47, 0.00],
        [-0.10, 0.47, 0.00],
        [0.00, -0.25, 0.00],
        [0.09, 0.87, -0.03],
        [-0.09, 0.87, -0.03],
        [0.00, -0.30, 0.00],
        [0.11, 0.93, 0.10],
        [-0.11, 0.93, 0.10],
        [0.00, -0.52, 0.00],
        [0.08, -0.42, 0.00],
        [-0.08, -0.42, 0.00],
        [0.00, -0.62, 0.03],
        [0.18, -0.45, 0.00],
        [-0.18, -0.45, 0.00],
        [0.43, -0.46, 0.00],
        [-0.43, -0.46, 0.00],
        [0.68, -0.46, 0.00],
        [-0.68, -0.46, 0.00],
    ]
)

# The body origin is not at the pelvis, which is what makes the pelvis-centered
# transport formula non-trivial.
_PELVIS_OFFSET = np.array([0.0, 0.22, 0.03])

_PART_RADII = (
    0.12, 0.07, 0.07, 0.11, 0.05, 0.05, 0.11, 0.045, 0.045, 0.11, 0.04,
    0.04, 0.05, 0.05, 0.05, 0.09, 0.045, 0.045, 0.04, 0.04, 0.035, 0.035,
)


@dataclass(frozen=True)
class BodyTemplate:
    """Immutable body template arrays."""

    rest_vertices: np.ndarray
    shape_basis: np.ndarray
    joint_parents: Tuple[int, ...]
    joint_regressor: np.ndarray
    vertex_part: np.ndarray
    faces: np.ndarray

    def __post_init__(self) -> None:
        for name in ("rest_vertices", "shape_basis", "joint_regressor"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        for name in ("vertex_part", "faces"):
            arr = np.array(getattr(self, name), dtype=np.int64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "joint_parents", tuple(int(p) for p in self.joint_parents))
        self._validate()

    def _validate(self) -> None:
        m = self.rest_vertices.shape[0]
        j = len(self.joint_parents)
        if j != NUM_JOINTS:
            raise DomainError(f"Body template needs {NUM_JOINTS} joints, got {j}")
        if self.rest_vertices.shape != (m, 3):
            raise DomainError("rest_vertices must be M×3")
        if self.shape_basis.shape != (NUM_BETAS, m, 3):
            raise DomainError(f"shape_basis must be {NUM_BETAS}×M×3")
        if self.joint_regressor.shape != (j, m):
            raise DomainError("joint_regressor must be J×M")
        if np.any(self.joint_regressor < 0):
            raise DomainError("joint_regressor weights must be non-negative")
        if np.abs(self.joint_regressor.sum(axis=1) - 1.0).max() > 1e-9:
            raise DomainError("joint_regressor rows must sum to 1")
        if self.vertex_part.shape != (m,) or self.vertex_part.min() < 0 or self.vertex_part.max() >= j:
            raise DomainError("vertex_part must assign every vertex to a joint")
        roots = [k for k, p in enumerate(self.joint_parents) if p < 0]
        if roots != [0]:
            raise DomainError("Kinematic tree must have exactly one root at index 0")
        for k, p in enumerate(self.joint_parents[1:], start=1):
            if not 0 <= p < k:
                raise DomainError(f"Joint {k} has parent {p}; parents must precede children")
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= m):
            raise DomainError("Face indices out of range")

    @property
    def num_vertices(self) -> int:
        return int(self.rest_vertices.shape[0])

    @property
    def num_joints(self) -> int:
        return len(self.joint_parents)

    def to_dict(self) -> Dict[str, Any]:
        """Self-describing JSON-compatible representation."""
        return {
            "format": TEMPLATE_FORMAT,
            "version": 1,
            "joint_names": list(JOINT_NAMES),
            "joint_parents": list(self.joint_parents),
            "rest_vertices": self.rest_vertices.tolist(),
            "shape_basis": self.shape_basis.tolist(),
            "joint_regressor": self.joint_regressor.tolist(),
            "vertex_part": self.vertex_part.tolist(),
            "faces": self.faces.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "BodyTemplate":
        if data.get("format") != TEMPLATE_FORMAT:
            raise FormatError(f"Not a body template: format={data.get('format')!r}")
        try:
            return cls(
                rest_vertices=np.asarray(data["rest_vertices"]),
                shape_basis=np.asarray(data["shape_basis"]),
                joint_parents=tuple(data["joint_parents"]),
                joint_regressor=np.asarray(data["joint_regressor"]),
                vertex_part=np.asarray(data["vertex_part"]),
                faces=np.asarray(data["faces"]),
            )
        except KeyError as e:
            raise FormatError(f"Body template missing field {e}")


def _part_direction(joint: int, rest: np.ndarray, children: List[List[int]]) -> Tuple[np.ndarray, float]:
    """Bone axis and half-length of the capsule attached to a joint."""
    kids = children[joint]
    if len(kids) == 1:
        bone = rest[kids[0]] - rest[joint]
    elif joint == 0:
        bone = np.array([0.0, -0.12, 0.0])
    else:
        bone = rest[joint] - rest[JOINT_PARENTS[joint]]
        bone = 0.12 * bone / np.linalg.norm(bone)
    length = float(np.linalg.norm(bone))
    return bone / length, 0.5 * length


def build_template(seed: int = TEMPLATE_SEED) -> BodyTemplate:
    """Build the procedural body template deterministically from a seed.

    Each joint owns a capsule: vertex 0 sits on the joint (the regressor picks it),
    vertex 1 closes the far end of the bone, and vertices 2..9 form a ring around
    the bone midpoint. The shape basis is a size-scaling field followed by nine
    smooth random fields.

    No template asset ships with the package. The output depends only on the seed
    and the generator code, so TEMPLATE_SEED is the fixed data every run shares.
    `formats.write_template` exports it and `formats.read_template` loads it back.

    Args:
        seed: PCG64 seed

    Returns:
        BodyTemplate
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    rest_joints = _REST_JOINTS + _PELVIS_OFFSET
    children: List[List[int]] = [[] for _ in range(NUM_JOINTS)]
    for k, p in enumerate(JOINT_PARENTS):
        if p >= 0:
            children[p].append(k)

    ring_size = VERTICES_PER_PART - 2
    vertices = np.zeros((NUM_JOINTS * VERTICES_PER_PART, 3))
    faces = []
    for j in range(NUM_JOINTS):
        axis, half = _part_direction(j, rest_joints, children)
        helper = np.eye(3)[int(np.argmin(np.abs(axis)))]
        e1 = np.cross(axis, helper)
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(axis, e1)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        radius = _PART_RADII[j] * (1.0 + 0.1 * rng.uniform(-1.0, 1.0, size=ring_size // 2))
        base = j * VERTICES_PER_PART
        center = rest_joints[j] + half * axis
        vertices[base] = rest_joints[j]
        vertices[base + 1] = rest_joints[j] + 2.0 * half * axis
        for k in range(ring_size):
            angle = phase + 2.0 * np.pi * k / ring_size
            r = radius[k % (ring_size // 2)]
            vertices[base + 2 + k] = center + r * (np.cos(angle) * e1 + np.sin(angle) * e2)
        for k in range(ring_size):
            a = base + 2 + k
            b = base + 2 + (k + 1) % ring_size
            faces.append((base, b, a))
            faces.append((base + 1, a, b))

    basis = np.zeros((NUM_BETAS, vertices.shape[0], 3))
    basis[0] = 0.1 * vertices
    for k in range(1, NUM_BETAS):
        for _ in range(3):
            amplitude = rng.normal(scale=0.01, size=3)
            direction = rng.normal(size=3)
            direction *= rng.uniform(2.0, 4.0) / np.linalg.norm(direction)
            offset = rng.uniform(0.0, 2.0 * np.pi)
            basis[k] += np.sin(vertices @ direction + offset)[:, None] * amplitude

    regressor = np.zeros((NUM_JOINTS, vertices.shape[0]))
    regressor[np.arange(NUM_JOINTS), np.arange(NUM_JOINTS) * VERTICES_PER_PART] = 1.0

    template = BodyTemplate(
        rest_vertices=vertices,
        shape_basis=basis,
        joint_parents=JOINT_PARENTS,
        joint_regressor=regressor,
        vertex_part=np.repeat(np.arange(NUM_JOINTS), VERTICES_PER_PART),
        faces=np.asarray(faces),
    )
    logger.debug(
        f"Built body template: {template.num_vertices} vertices, {len(faces)} faces"
    )
    return template


@lru_cache(maxsize=1)
def default_template() -> BodyTemplate:
    """Shared template built from the fixed seed."""
    return build_template(TEMPLATE_SEED)


@dataclass(frozen=True)
class BodyParams:
    """Body parameters {Φ, θ, β, Γ}; rotations are 3×3 matrices."""

    phi: np.ndarray
    theta: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray

    def __post_init__(self) -> None:
        phi = np.array(self.phi, dtype=np.float64)
        theta = np.array(self.theta, dtype=np.float64)
        beta = np.array(self.beta, dtype=np.float64)
        gamma = np.array(self.gamma, dtype=np.float64)
        if phi.shape != (3, 3) or theta.ndim != 3 or theta.shape[1:] != (3, 3):
            raise DomainError(f"Bad rotation shapes: phi {phi.shape}, theta {theta.shape}")
        if beta.shape != (NUM_BETAS,) or gamma.shape != (3,):
            raise DomainError(f"Bad shapes: beta {beta.shape}, gamma {gamma.shape}")
        if not (is_rotation(phi, 1e-6) and is_rotation(theta, 1e-6)):
            raise DomainError("Body parameters contain an invalid rotation")
        if not (np.all(np.isfinite(beta)) and np.all(np.isfinite(gamma))):
            raise DomainError("Body parameters contain non-finite values")
        for name, arr in (("phi", phi), ("theta", theta), ("beta", beta), ("gamma", gamma)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def identity(cls, num_joints: int = NUM_JOINTS) -> "BodyParams":
        return cls(
            np.eye(3),
            np.tile(np.eye(3), (num_joints, 1, 1)),
            np.zeros(NUM_BETAS),
            np.zeros(3),
        )

    @property
    def num_joints(self) -> int:
        return int(self.theta.shape[0])

    def replace(self, **changes: Any) -> "BodyParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class BodyMesh:
    """Posed vertices in a declared frame ("camera" or "world")."""

    vertices: np.ndarray
    frame_tag: str = "camera"

    def __post_init__(self) -> None:
        verts = np.array(self.vertices, dtype=np.float64)
        verts.setflags(write=False)
        object.__setattr__(self, "vertices", verts)

    def transformed(self, pose: SE3Pose, frame_tag: Optional[str] = None) -> "BodyMesh":
        return BodyMesh(pose.apply(self.vertices), frame_tag or self.frame_tag)


def shape_blend(template: BodyTemplate, beta: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """Shaped vertices and joints: rest + Σ β_k basis_k, joints = regressor · vertices.

    Raises:
        DomainError: If beta does not have 10 entries
    """
    beta = np.asarray(beta, dtype=np.float64)
    if beta.shape != (NUM_BETAS,):
        raise DomainError(f"beta must have {NUM_BETAS} entries, got {beta.shape}")
    vertices = template.rest_vertices + np.tensordot(beta, template.shape_basis, axes=1)
    joints = template.joint_regressor @ vertices
    return vertices, joints


def pelvis(template: BodyTemplate, beta: Sequence[float]) -> np.ndarray:
    """Shaped pelvis location c(β)."""
    return shape_blend(template, beta)[1][0]


def forward_kinematics(
    template: BodyTemplate, theta: np.ndarray, shaped_joints: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Chain local rotations down the tree.

    Args:
        template: Body template
        theta: J×3×3 local rotations, each about its shaped joint in the parent frame
        shaped_joints: J×3 rest joint locations after shape blending

    Returns:
        Tuple of (global rotations J×3×3, posed joint locations J×3)
    """
    rotations = np.empty((template.num_joints, 3, 3))
    positions = np.empty((template.num_joints, 3))
    for j, parent in enumerate(template.joint_parents):
        if parent < 0:
            rotations[j] = theta[j]
            positions[j] = shaped_joints[j]
        else:
            rotations[j] = rotations[parent] @ theta[j]
            positions[j] = (
                rotations[parent] @ (shaped_joints[j] - shaped_joints[parent])
                + positions[parent]
            )
    return rotations, positions


def pose_mesh(template: BodyTemplate, params: BodyParams, frame_tag: str = "camera") -> BodyMesh:
    """Pose the body: FK, rigid parts, then Φ about the pelvis plus Γ."""
    if params.num_joints != template.num_joints:
        raise DomainError(
            f"Parameters have {params.num_joints} joints, template has {template.num_joints}"
        )
    vertices, joints = shape_blend(template, params.beta)
    rotations, positions = forward_kinematics(template, params.theta, joints)
    part = template.vertex_part
    local = vertices - joints[part]
    posed = np.einsum("mij,mj->mi", rotations[part], local) + positions[part]
    center = joints[0]
    world = (posed - center) @ params.phi.T + center + params.gamma
    return BodyMesh(world, frame_tag)


def posed_joints(template: BodyTemplate, params: BodyParams) -> np.ndarray:
    """Regressed joint locations of the posed mesh (J×3)."""
    return template.joint_regressor @ pose_mesh(template, params).vertices
