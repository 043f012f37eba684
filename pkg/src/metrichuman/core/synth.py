"""Deterministic synthetic scenes with exact ground truth, plus brute-force oracles.

A scenario is a closed room with a few boxes, filmed by a slowly moving camera
while one or more bodies walk through it. Depth is ray-cast exactly, bodies are
splatted with the calibration rasterizer, and the depth video is distorted by a
known scale and offset. All randomness comes from PCG64 streams keyed by the seed,
so a seed reproduces a scenario bit for bit on every platform.
"""

import logging
import math
from dataclasses import dataclass, fields
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline

from .ba_core import (
    BAProblem,
    FramePairObservation,
    anchor_colors,
    anchor_human_flags,
    initial_inv_depths,
    sample_depth,
)
from .body_model import (
    NUM_BETAS,
    NUM_JOINTS,
    BodyParams,
    BodyTemplate,
    default_template,
    pose_mesh,
)
from .depth_calibration import (
    CalibrationEnergy,
    CalibrationFrame,
    frames_from_tracks,
    rasterize,
)
from .error_handler import DomainError
from .geometry import (
    Intrinsics,
    PointCloud,
    SE3Pose,
    project_points,
    so3_exp,
    unproject_depth,
    unproject_points,
)
from .world_frame import BodyTrack, world_to_camera

logger = logging.getLogger(__name__)

SPLAT_RADIUS = 2

# Room bounds (world = first camera frame, y down): x walls, ceiling/floor, front/back.
ROOM_MIN = np.array([-5.0, -2.5, -3.0])
ROOM_MAX = np.array([5.0, 1.6, 9.0])
FLOOR_Y = ROOM_MAX[1]
STANDING_HEIGHT = 0.42

_SWING_JOINTS = {1: 0.35, 2: -0.35, 4: 0.4, 5: -0.4, 16: -0.3, 17: 0.3, 18: 0.25, 19: -0.25}
_HUMAN_COLORS = np.array(
    [[200, 60, 60], [60, 160, 220], [230, 170, 40], [120, 200, 90]], dtype=np.float64
)
_SURFACE_COLORS = np.array(
    [
        [150, 140, 130],
        [150, 140, 130],
        [220, 220, 225],
        [110, 90, 70],
        [170, 180, 160],
        [170, 180, 160],
        [90, 110, 160],
    ],
    dtype=np.float64,
)


@dataclass(frozen=True)
class SynthConfig:
    """Synthetic scenario settings."""

    num_frames: int = 8
    width: int = 128
    height: int = 96
    anchors_per_frame: int = 64
    pair_window: int = 2
    num_humans: int = 1
    noise_px: float = 0.0
    corruption: float = 0.0
    depth_scale: float = 2.0
    depth_offset: float = 0.5
    depth_noise: float = 0.0
    pose_perturbation: Tuple[float, float] = (0.05, 0.05)
    missing_fraction: float = 0.0
    body_noise: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "pose_perturbation", tuple(self.pose_perturbation))
        if self.num_frames < 2:
            raise DomainError(f"A scenario needs at least 2 frames, got {self.num_frames}")
        if self.width < 8 or self.height < 8:
            raise DomainError(f"Image too small: {self.width}x{self.height}")
        if self.anchors_per_frame < 1 or self.pair_window < 1:
            raise DomainError("anchors_per_frame and pair_window must be positive")
        if not 1 <= self.num_humans <= len(_HUMAN_COLORS):
            raise DomainError(f"num_humans must lie in [1, {len(_HUMAN_COLORS)}]")
        if not 0.0 <= self.corruption <= 1.0:
            raise DomainError(f"corruption must lie in [0, 1], got {self.corruption}")
        if not 0.0 <= self.missing_fraction < 1.0:
            raise DomainError(f"missing_fraction must lie in [0, 1), got {self.missing_fraction}")
        if not self.depth_scale > 0:
            raise DomainError(f"depth_scale must be positive, got {self.depth_scale}")
        if min(self.noise_px, self.depth_noise, self.body_noise) < 0:
            raise DomainError("Noise levels must be non-negative")
        if len(self.pose_perturbation) != 2 or min(self.pose_perturbation) < 0:
            raise DomainError("pose_perturbation must be [rotation_rad, translation_m] >= 0")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SynthConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})


@dataclass(frozen=True)
class SynthScenario:
    """A generated scene with every ground-truth quantity kept alongside the inputs."""

    seed: int
    config: SynthConfig
    intr: Intrinsics
    gt_poses: Tuple[SE3Pose, ...]
    gt_scene: PointCloud
    gt_tracks: Tuple[BodyTrack, ...]
    camera_tracks: Tuple[BodyTrack, ...]
    rgb: np.ndarray
    depth_true: np.ndarray
    depth: np.ndarray
    masks: np.ndarray
    anchors: Tuple[np.ndarray, ...]
    observations: Tuple[FramePairObservation, ...]
    scale: float
    offset: float

    @property
    def num_frames(self) -> int:
        return len(self.gt_poses)

    def union_masks(self) -> Tuple[np.ndarray, ...]:
        return tuple(m > 0 for m in self.masks)

    def metric_depth(self) -> np.ndarray:
        """Distorted depth mapped back with the true calibration."""
        return self.scale * self.depth + self.offset

    def gt_inv_depths(self) -> Tuple[np.ndarray, ...]:
        return tuple(
            1.0 / sample_depth(self.depth_true[t], self.anchors[t]) for t in range(self.num_frames)
        )

    def calibration_frames(self, template: Optional[BodyTemplate] = None) -> List[CalibrationFrame]:
        """Distorted depth, masks and camera-frame meshes of the observed bodies."""
        return frames_from_tracks(list(self.depth), list(self.masks), self.camera_tracks, template)

    def anchor_colors(self) -> Tuple[np.ndarray, ...]:
        return anchor_colors(self.rgb, self.anchors)

    def anchor_human_flags(self) -> Tuple[np.ndarray, ...]:
        return anchor_human_flags(self.masks, self.anchors)

    def perturbed_poses(self) -> Tuple[SE3Pose, ...]:
        """Ground-truth poses with seeded noise on every frame but the first."""
        rng = _stream(self.seed, 2)
        rot_std, trans_std = self.config.pose_perturbation
        poses = [self.gt_poses[0]]
        for pose in self.gt_poses[1:]:
            dphi = rng.normal(scale=rot_std, size=3)
            dt = rng.normal(scale=trans_std, size=3)
            poses.append(SE3Pose(pose.rotation @ so3_exp(dphi), pose.translation + dt))
        return tuple(poses)

    def ba_problem(
        self,
        prior_depths: Optional[Sequence[Optional[np.ndarray]]] = None,
        mask_dynamic: bool = True,
        use_depth_prior: bool = True,
        depth_weight: float = 1.0,
        perturb: bool = True,
    ) -> BAProblem:
        """Bundle adjustment problem over the scenario's correspondences.

        Args:
            prior_depths: Metric depth per frame (defaults to the truly calibrated depth)
            mask_dynamic: Pass the union masks so dynamic anchors are ignored
            use_depth_prior: Attach the inverse-depth prior
            depth_weight: Prior weight λ
            perturb: Start from perturbed poses; otherwise start at ground truth

        Returns:
            BAProblem with inverse depths initialized from the prior
        """
        if prior_depths is None:
            prior_depths = list(self.metric_depth())
        poses = self.perturbed_poses() if perturb else self.gt_poses
        return BAProblem(
            intr=self.intr,
            poses=poses,
            inv_depths=initial_inv_depths(prior_depths, self.anchors),
            anchors=self.anchors,
            observations=self.observations,
            union_masks=self.union_masks() if mask_dynamic else None,
            prior_depths=tuple(prior_depths) if use_depth_prior else None,
            depth_weight=depth_weight,
        )


def _stream(seed: int, purpose: int) -> np.random.Generator:
    """Independent PCG64 stream per purpose so settings do not shift each other's draws."""
    return np.random.Generator(np.random.PCG64([int(seed), purpose]))


def _random_boxes(rng: np.random.Generator, count: int = 3) -> List[Tuple[np.ndarray, np.ndarray]]:
    boxes = []
    for _ in range(count):
        size = rng.uniform(0.5, 1.4, size=3)
        center_x = rng.uniform(-3.5, 3.5)
        center_z = rng.uniform(5.5, 8.0)
        lo = np.array([center_x - size[0] / 2, FLOOR_Y - size[1], center_z - size[2] / 2])
        boxes.append((lo, lo + size))
    return boxes


def _camera_trajectory(rng: np.random.Generator, num_frames: int) -> Tuple[SE3Pose, ...]:
    """Cubic spline through a few random waypoints; frame 0 is the world origin."""
    knots = np.linspace(0.0, num_frames - 1, 4)
    rotvecs = rng.uniform(-1.0, 1.0, size=(4, 3)) * np.deg2rad(3.0)
    offsets = rng.uniform(-0.2, 0.2, size=(4, 3))
    rotvecs[0] = 0.0
    offsets[0] = 0.0
    rot_spline = CubicSpline(knots, rotvecs, axis=0)
    trans_spline = CubicSpline(knots, offsets, axis=0)
    times = np.arange(num_frames, dtype=np.float64)
    poses = [SE3Pose.identity()]
    for t in times[1:]:
        poses.append(SE3Pose(so3_exp(rot_spline(t)), trans_spline(t)))
    return tuple(poses)


def _ray_cast(
    pose: SE3Pose,
    intr: Intrinsics,
    boxes: Sequence[Tuple[np.ndarray, np.ndarray]],
) -> Tuple[np.ndarray, np.ndarray]:
    """Exact camera-frame depth and a surface id per pixel."""
    rows, cols = np.mgrid[0 : intr.height, 0 : intr.width].astype(np.float64)
    rays_cam = np.stack(
        [(cols - intr.cx) / intr.fx, (rows - intr.cy) / intr.fy, np.ones_like(cols)], axis=-1
    )
    # With the camera-frame z component fixed to 1, the ray parameter is depth.
    dirs = rays_cam @ pose.rotation.T
    origin = pose.translation

    depth = np.full(rows.shape, np.inf)
    surface = np.zeros(rows.shape, dtype=np.int64)
    with np.errstate(divide="ignore", invalid="ignore"):
        for axis in range(3):
            for side, bound in enumerate((ROOM_MIN[axis], ROOM_MAX[axis])):
                t = (bound - origin[axis]) / dirs[..., axis]
                hit = (t > 0) & (t < depth)
                depth[hit] = t[hit]
                surface[hit] = 2 * axis + side
        for lo, hi in boxes:
            t1 = (lo - origin) / dirs
            t2 = (hi - origin) / dirs
            near = np.nanmax(np.minimum(t1, t2), axis=-1)
            far = np.nanmin(np.maximum(t1, t2), axis=-1)
            hit = (near <= far) & (near > 0) & (near < depth)
            depth[hit] = near[hit]
            surface[hit] = 6
    return depth, surface


def _surface_colors(points: np.ndarray, surface: np.ndarray) -> np.ndarray:
    """Checkerboard shading of the base color of each surface."""
    checker = np.floor(points / 0.5).astype(np.int64).sum(axis=-1) % 2
    shade = np.where(checker == 0, 1.0, 0.75)
    return _SURFACE_COLORS[surface] * shade[..., None]


def walking_track(
    rng: np.random.Generator, human: int, num_humans: int, num_frames: int
) -> Tuple[BodyParams, ...]:
    """World-frame walk: constant heading, sinusoidal limb swing."""
    beta = rng.normal(scale=0.3, size=NUM_BETAS)
    lateral = 0.0 if num_humans == 1 else -0.7 + 1.4 * human / (num_humans - 1)
    start = np.array(
        [lateral + rng.uniform(-0.2, 0.2), STANDING_HEIGHT, rng.uniform(3.5, 4.5)]
    )
    heading = rng.uniform(-np.pi, np.pi)
    velocity = 0.02 * np.array([np.cos(heading), 0.0, np.sin(heading)])
    yaw = rng.uniform(-np.pi / 6, np.pi / 6)
    phi = so3_exp(np.array([0.0, yaw, 0.0]))
    frequency = rng.uniform(0.05, 0.1)
    phase = rng.uniform(0.0, 2.0 * np.pi)

    slots = []
    for t in range(num_frames):
        swing = np.sin(2.0 * np.pi * frequency * t + phase)
        theta = np.tile(np.eye(3), (NUM_JOINTS, 1, 1))
        for joint, amplitude in _SWING_JOINTS.items():
            theta[joint] = so3_exp(np.array([amplitude * swing, 0.0, 0.0]))
        slots.append(BodyParams(phi=phi, theta=theta, beta=beta, gamma=start + t * velocity))
    return tuple(slots)


def _perturb_params(rng: np.random.Generator, params: BodyParams, noise: float) -> BodyParams:
    theta = np.stack([r @ so3_exp(rng.normal(scale=noise, size=3)) for r in params.theta])
    return BodyParams(
        phi=params.phi @ so3_exp(rng.normal(scale=noise, size=3)),
        theta=theta,
        beta=params.beta + rng.normal(scale=noise, size=NUM_BETAS),
        gamma=params.gamma + rng.normal(scale=noise, size=3),
    )


def _anchor_grid(rng: np.random.Generator, count: int, intr: Intrinsics) -> np.ndarray:
    """Jittered integer pixel grid with `count` anchors."""
    nx = int(math.ceil(math.sqrt(count * intr.width / intr.height)))
    ny = int(math.ceil(count / nx))
    cell_w = intr.width / nx
    cell_h = intr.height / ny
    jitter = int(max(0.0, math.floor(min(cell_w, cell_h) / 4)))
    gy, gx = np.mgrid[0:ny, 0:nx]
    u = np.floor((gx.ravel() + 0.5) * cell_w)
    v = np.floor((gy.ravel() + 0.5) * cell_h)
    if jitter:
        u = u + rng.integers(-jitter, jitter + 1, size=u.shape)
        v = v + rng.integers(-jitter, jitter + 1, size=v.shape)
    u = np.clip(u, 0, intr.width - 1)
    v = np.clip(v, 0, intr.height - 1)
    return np.stack([u, v], axis=-1)[:count].astype(np.float64)


def _correspondences(
    rng: np.random.Generator,
    config: SynthConfig,
    intr: Intrinsics,
    poses: Sequence[SE3Pose],
    depth_true: np.ndarray,
    masks: np.ndarray,
    anchors: Sequence[np.ndarray],
    tracks: Sequence[BodyTrack],
) -> Tuple[FramePairObservation, ...]:
    """Ground-truth flow for every frame pair within the window.

    A ceil(corruption · n) subset of the n anchors inside frame i's body masks gets
    the body's own motion as target, offset by 5 to 10 px, at full confidence.
    """
    num_frames = len(poses)
    observations = []
    for i in range(num_frames):
        cam_points = unproject_points(intr, anchors[i], sample_depth(depth_true[i], anchors[i]))
        world = poses[i].apply(cam_points)
        instance = masks[i][anchors[i][:, 1].astype(np.int64), anchors[i][:, 0].astype(np.int64)]
        in_mask = np.nonzero(instance > 0)[0]
        for j in range(max(0, i - config.pair_window), min(num_frames, i + config.pair_window + 1)):
            if j == i:
                continue
            inv = poses[j].inverse()
            targets, front = project_points(intr, inv.apply(world))
            noise = rng.normal(scale=config.noise_px, size=targets.shape)
            inside = (
                front
                & (targets[:, 0] >= 0)
                & (targets[:, 0] <= intr.width - 1)
                & (targets[:, 1] >= 0)
                & (targets[:, 1] <= intr.height - 1)
            )
            confidence = np.repeat(inside[:, None].astype(np.float64), 2, axis=1)
            targets = np.where(front[:, None], targets + noise, anchors[i])

            num_corrupt = int(math.ceil(config.corruption * len(in_mask)))
            if num_corrupt:
                chosen = rng.choice(in_mask, size=num_corrupt, replace=False)
                for k in chosen:
                    human = int(instance[k]) - 1
                    start = tracks[human].slots[i]
                    end = tracks[human].slots[j]
                    assert start is not None and end is not None
                    moved = world[k] + (end.gamma - start.gamma)
                    uv, ok = project_points(intr, inv.apply(moved))
                    if not ok[0]:
                        continue
                    angle = rng.uniform(0.0, 2.0 * np.pi)
                    radius = rng.uniform(5.0, 10.0)
                    targets[k] = uv[0] + radius * np.array([np.cos(angle), np.sin(angle)])
                    confidence[k] = 1.0
            observations.append(
                FramePairObservation(i=i, j=j, pixels=anchors[i], targets=targets, confidence=confidence)
            )
    return tuple(observations)


def generate(
    seed: int,
    config: Optional[SynthConfig] = None,
    template: Optional[BodyTemplate] = None,
) -> SynthScenario:
    """Generate a scenario deterministically from a seed.

    Args:
        seed: Scenario seed
        config: Scenario settings
        template: Body template (defaults to the shared procedural template)

    Returns:
        SynthScenario

    Raises:
        DomainError: If the configuration is contradictory
    """
    config = config or SynthConfig()
    template = template or default_template()
    geometry_rng = _stream(seed, 0)
    flow_rng = _stream(seed, 1)
    body_rng = _stream(seed, 3)
    intr = Intrinsics.from_image_size(config.width, config.height)
    num_frames = config.num_frames

    poses = _camera_trajectory(geometry_rng, num_frames)
    boxes = _random_boxes(geometry_rng)
    world_slots = [
        walking_track(geometry_rng, n, config.num_humans, num_frames)
        for n in range(config.num_humans)
    ]
    gt_tracks = tuple(BodyTrack(n, slots, "world") for n, slots in enumerate(world_slots))

    shape = (num_frames, intr.height, intr.width)
    depth_true = np.empty(shape)
    masks = np.zeros(shape, dtype=np.uint8)
    rgb = np.empty(shape + (3,), dtype=np.uint8)
    for t, pose in enumerate(poses):
        depth, surface = _ray_cast(pose, intr, boxes)
        points = pose.apply(unproject_depth(intr, depth))
        color = _surface_colors(points, surface)
        for n, track in enumerate(gt_tracks):
            params = track.slots[t]
            assert params is not None
            mesh = pose_mesh(template, world_to_camera(params, pose, template), "camera")
            raster = rasterize(mesh, intr, SPLAT_RADIUS)
            closer = raster.mask & (raster.zbuf < depth)
            depth[closer] = raster.zbuf[closer]
            masks[t][closer] = n + 1
            color[closer] = _HUMAN_COLORS[n] * (0.85 + 0.15 * np.cos(raster.zbuf[closer]))[:, None]
        depth_true[t] = depth
        rgb[t] = np.clip(np.rint(color), 0, 255).astype(np.uint8)

    distorted = (depth_true - config.depth_offset) / config.depth_scale
    if config.depth_noise > 0:
        distorted = distorted * (1.0 + geometry_rng.normal(scale=config.depth_noise, size=shape))
    if not np.all(distorted > 0):
        raise DomainError(
            f"depth_offset {config.depth_offset} leaves non-positive distorted depth "
            f"(nearest surface at {depth_true.min():.3f} m)"
        )

    anchors = tuple(_anchor_grid(geometry_rng, config.anchors_per_frame, intr) for _ in range(num_frames))
    observations = _correspondences(
        flow_rng, config, intr, poses, depth_true, masks, anchors, gt_tracks
    )

    camera_tracks = []
    for track in gt_tracks:
        slots: List[Optional[BodyParams]] = []
        for t, params in enumerate(track.slots):
            assert params is not None
            cam = world_to_camera(params, poses[t], template)
            if config.body_noise > 0:
                cam = _perturb_params(body_rng, cam, config.body_noise)
            slots.append(cam)
        if config.missing_fraction > 0:
            drop = body_rng.random(num_frames) < config.missing_fraction
            if drop.all():
                drop[0] = False
            slots = [None if d else s for s, d in zip(slots, drop)]
        camera_tracks.append(BodyTrack(track.track_id, tuple(slots), "camera"))

    scene = _scene_points(geometry_rng, intr, poses[0], depth_true[0], masks[0], rgb[0])
    logger.debug(
        f"Generated scenario seed={seed}: {num_frames} frames, {len(observations)} observations, "
        f"{int((masks > 0).sum())} body pixels"
    )
    return SynthScenario(
        seed=int(seed),
        config=config,
        intr=intr,
        gt_poses=poses,
        gt_scene=scene,
        gt_tracks=gt_tracks,
        camera_tracks=tuple(camera_tracks),
        rgb=rgb,
        depth_true=depth_true,
        depth=distorted,
        masks=masks,
        anchors=anchors,
        observations=observations,
        scale=float(config.depth_scale),
        offset=float(config.depth_offset),
    )


def _scene_points(
    rng: np.random.Generator,
    intr: Intrinsics,
    pose: SE3Pose,
    depth: np.ndarray,
    mask: np.ndarray,
    rgb: np.ndarray,
    count: int = 1024,
) -> PointCloud:
    """Static world points sampled from the background of one frame."""
    rows, cols = np.nonzero(mask == 0)
    pick = rng.choice(len(rows), size=min(count, len(rows)), replace=False)
    pick.sort()
    rows, cols = rows[pick], cols[pick]
    pixels = np.stack([cols, rows], axis=-1).astype(np.float64)
    xyz = pose.apply(unproject_points(intr, pixels, depth[rows, cols]))
    return PointCloud(xyz, rgb[rows, cols].astype(np.float64) / 255.0, np.zeros(len(xyz)))


def oracle_grid_calibration(
    frames: Sequence[CalibrationFrame],
    intr: Intrinsics,
    lambda_size: float,
    s_grid: np.ndarray,
    o_grid: np.ndarray,
    radius: int = SPLAT_RADIUS,
) -> Tuple[float, float, float]:
    """Exhaustive minimum of the calibration energy over an (s, o) grid.

    Returns:
        Tuple of (s, o, energy) at the best grid point
    """
    energy = CalibrationEnergy(frames, intr, lambda_size=lambda_size, radius=radius)
    s_mesh, o_mesh = np.meshgrid(np.asarray(s_grid, float), np.asarray(o_grid, float), indexing="ij")
    values = energy.total_on_grid(s_mesh, o_mesh)
    best = np.unravel_index(int(np.argmin(values)), values.shape)
    return float(s_mesh[best]), float(o_mesh[best]), float(values[best])


def oracle_fd_gradient(
    f: Callable[[np.ndarray], float], x: np.ndarray, eps: float = 1e-6
) -> np.ndarray:
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for k in range(x.size):
        step = np.zeros_like(x)
        step.flat[k] = eps
        grad.flat[k] = (f(x + step) - f(x - step)) / (2.0 * eps)
    return grad


def scene_cloud_for_training(scenario: SynthScenario, human_points: int = 256) -> PointCloud:
    """Ground-truth static points plus body vertices flagged as human."""
    template = default_template()
    xyz = [scenario.gt_scene.xyz]
    rgb = [scenario.gt_scene.rgb]
    human = [scenario.gt_scene.human]
    for track in scenario.gt_tracks:
        params = track.slots[0]
        assert params is not None
        verts = pose_mesh(template, params, "world").vertices[:human_points]
        xyz.append(verts)
        rgb.append(np.tile(_HUMAN_COLORS[track.track_id % len(_HUMAN_COLORS)] / 255.0, (len(verts), 1)))
        human.append(np.ones(len(verts)))
    return PointCloud(np.concatenate(xyz), np.concatenate(rgb), np.concatenate(human))

