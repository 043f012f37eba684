"""Pseudo-RGB-D bundle adjustment with dynamic-foreground masking.

Unknowns are camera-to-world poses G_t (frame 0 held fixed) and one inverse depth
per anchor pixel. The cost is the confidence-weighted reprojection error over
frame pairs plus an inverse-depth prior at static anchors:

    E = Σ_ij Σ_k w′_ijk ⊙ ‖p*_ijk − Π(G_j⁻¹ G_i Π⁻¹(p_ik, 1/d_ik))‖²
        + λ Σ_t Σ_k (d_tk − 1/D^m_t(p_tk))²

Pose updates use the retraction R ← R exp(δφ), t ← t + δt.
"""

import logging
from dataclasses import dataclass, field, fields, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .error_handler import DomainError
from .geometry import (
    Intrinsics,
    PointCloud,
    SE3Pose,
    project_points,
    relative_pose,
    se3_inverse,
    so3_exp,
    so3_hat,
)

logger = logging.getLogger(__name__)

POSE_DOF = 6
MIN_DAMPING = 1e-8
_BEHIND_EPS = 1e-9


@dataclass(frozen=True)
class SolverConfig:
    """Bundle adjustment settings."""

    max_iters: int = 50
    damping_init: float = 1e-4
    damping_max: float = 1e8
    tol: float = 1e-10
    cost_floor: float = 1e-20
    depth_weight: float = 1.0
    use_depth_prior: bool = True
    mask_dynamic: bool = True
    epipolar_tau_px: float = 2.0

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SolverConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})


@dataclass(frozen=True)
class FramePairObservation:
    """Correspondences from anchors of frame i to targets in frame j."""

    i: int
    j: int
    pixels: np.ndarray
    targets: np.ndarray
    confidence: np.ndarray

    def __post_init__(self) -> None:
        if self.i == self.j:
            raise DomainError(f"Observation must link two frames, got i = j = {self.i}")
        pixels = np.array(self.pixels, dtype=np.float64).reshape(-1, 2)
        targets = np.array(self.targets, dtype=np.float64).reshape(-1, 2)
        confidence = np.array(self.confidence, dtype=np.float64).reshape(-1, 2)
        if not (len(pixels) == len(targets) == len(confidence)):
            raise DomainError(
                f"Observation ({self.i}, {self.j}) list lengths differ: "
                f"{len(pixels)}, {len(targets)}, {len(confidence)}"
            )
        if np.any(confidence < 0) or not np.all(np.isfinite(confidence)):
            raise DomainError(f"Observation ({self.i}, {self.j}) has negative confidence")
        for name, arr in (("pixels", pixels), ("targets", targets), ("confidence", confidence)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def with_confidence(self, confidence: np.ndarray) -> "FramePairObservation":
        return replace(self, confidence=confidence)


@dataclass(frozen=True)
class BAProblem:
    """Bundle adjustment inputs.

    `anchors[t]` are the anchor pixels of frame t; every observation from frame i
    uses exactly those anchors, in order. `union_masks` may be None to disable
    dynamic masking.
    """

    intr: Intrinsics
    poses: Tuple[SE3Pose, ...]
    inv_depths: Tuple[np.ndarray, ...]
    anchors: Tuple[np.ndarray, ...]
    observations: Tuple[FramePairObservation, ...]
    union_masks: Optional[Tuple[np.ndarray, ...]] = None
    prior_depths: Optional[Tuple[Optional[np.ndarray], ...]] = None
    depth_weight: float = 1.0

    def __post_init__(self) -> None:
        num_frames = len(self.poses)
        object.__setattr__(self, "poses", tuple(self.poses))
        object.__setattr__(
            self, "inv_depths", tuple(np.asarray(d, dtype=np.float64).reshape(-1) for d in self.inv_depths)
        )
        object.__setattr__(
            self, "anchors", tuple(np.asarray(a, dtype=np.float64).reshape(-1, 2) for a in self.anchors)
        )
        object.__setattr__(self, "observations", tuple(self.observations))
        if len(self.inv_depths) != num_frames or len(self.anchors) != num_frames:
            raise DomainError("poses, inv_depths and anchors must cover the same frames")
        for t, (anchors, depths) in enumerate(zip(self.anchors, self.inv_depths)):
            if len(anchors) != len(depths):
                raise DomainError(f"Frame {t}: {len(anchors)} anchors but {len(depths)} depths")
            inside = (
                (anchors[:, 0] >= 0)
                & (anchors[:, 0] <= self.intr.width - 1)
                & (anchors[:, 1] >= 0)
                & (anchors[:, 1] <= self.intr.height - 1)
            )
            if not np.all(inside):
                raise DomainError(f"Frame {t}: anchor pixels outside the image")
        for obs in self.observations:
            if not (0 <= obs.i < num_frames and 0 <= obs.j < num_frames):
                raise DomainError(f"Observation ({obs.i}, {obs.j}) references unknown frames")
            if not np.array_equal(obs.pixels, self.anchors[obs.i]):
                raise DomainError(
                    f"Observation ({obs.i}, {obs.j}) pixels differ from frame {obs.i} anchors"
                )
        if self.union_masks is not None:
            masks = tuple(np.asarray(m) > 0 for m in self.union_masks)
            if len(masks) != num_frames:
                raise DomainError("union_masks must cover every frame")
            object.__setattr__(self, "union_masks", masks)
        if self.prior_depths is not None:
            if len(self.prior_depths) != num_frames:
                raise DomainError("prior_depths must cover every frame")
            object.__setattr__(self, "prior_depths", tuple(self.prior_depths))
        if self.depth_weight < 0:
            raise DomainError("depth_weight must be non-negative")

    @property
    def num_frames(self) -> int:
        return len(self.poses)

    def replace(self, **changes: Any) -> "BAProblem":
        return replace(self, **changes)


@dataclass(frozen=True)
class BASolution:
    """Solved poses and inverse depths with the accepted-step cost history."""

    poses: Tuple[SE3Pose, ...]
    inv_depths: Tuple[np.ndarray, ...]
    cost_trace: Tuple[float, ...]
    converged: bool
    iterations: int = 0
    damping: float = 0.0
    diagnostics: Dict[str, Any] = field(default_factory=dict)


def _nearest_pixels(
    pixels: np.ndarray, shape: Tuple[int, ...]
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rounded (rows, cols) of each (u, v) and whether it lies inside the image.

    Every per-anchor image lookup goes through here so they all read the same pixel.
    Rows and columns outside the image are clamped to the border.
    """
    pixels = np.asarray(pixels, dtype=np.float64).reshape(-1, 2)
    height, width = shape[:2]
    cols = np.rint(pixels[:, 0])
    rows = np.rint(pixels[:, 1])
    inside = np.isfinite(cols) & np.isfinite(rows)
    inside &= (cols >= 0) & (cols < width) & (rows >= 0) & (rows < height)
    cols = np.clip(np.nan_to_num(cols), 0, width - 1).astype(np.int64)
    rows = np.clip(np.nan_to_num(rows), 0, height - 1).astype(np.int64)
    return rows, cols, inside


def _pixel_lookup(mask: np.ndarray, pixels: np.ndarray) -> np.ndarray:
    """Boolean mask value at the nearest pixel; False outside the image."""
    rows, cols, inside = _nearest_pixels(pixels, mask.shape)
    return np.asarray(mask, dtype=bool)[rows, cols] & inside


def sample_depth(depth: np.ndarray, pixels: np.ndarray) -> np.ndarray:
    """Depth at the nearest pixel; NaN outside the image."""
    rows, cols, inside = _nearest_pixels(pixels, depth.shape)
    return np.where(inside, depth[rows, cols], np.nan)


def predict_correspondence(
    gi: SE3Pose, gj: SE3Pose, intr: Intrinsics, pixel: np.ndarray, inv_depth: float
) -> Tuple[np.ndarray, bool]:
    """Where an anchor of frame i lands in frame j.

    Args:
        gi: Camera-to-world pose of frame i
        gj: Camera-to-world pose of frame j
        intr: Intrinsics
        pixel: Anchor pixel in frame i
        inv_depth: Inverse depth of the anchor

    Returns:
        Tuple of (pixel in frame j, valid); invalid when behind camera j

    Raises:
        DomainError: If inv_depth is not positive
    """
    if not inv_depth > 0:
        raise DomainError(f"Inverse depth must be positive, got {inv_depth}")
    depth = 1.0 / inv_depth
    point = np.array(
        [
            (pixel[0] - intr.cx) * depth / intr.fx,
            (pixel[1] - intr.cy) * depth / intr.fy,
            depth,
        ]
    )
    g_ij = relative_pose(se3_inverse(gi), se3_inverse(gj))
    uv, valid = project_points(intr, g_ij.apply(point))
    return uv[0], bool(valid[0])


def mask_confidence(
    w: np.ndarray,
    mask_i: np.ndarray,
    mask_j: np.ndarray,
    pixels: np.ndarray,
    targets: np.ndarray,
) -> np.ndarray:
    """Zero the confidence of anchors in M_i or whose target falls in M_j."""
    w = np.array(w, dtype=np.float64).reshape(-1, 2)
    dynamic = _pixel_lookup(np.asarray(mask_i) > 0, pixels) | _pixel_lookup(
        np.asarray(mask_j) > 0, targets
    )
    w[dynamic] = 0.0
    return w


class _Layout:
    """Variable layout and the fixed (pose-independent) parts of a problem."""

    def __init__(self, problem: BAProblem):
        self.problem = problem
        self.num_pose_vars = POSE_DOF * (problem.num_frames - 1)
        sizes = [len(d) for d in problem.inv_depths]
        self.depth_offset = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64) + self.num_pose_vars
        self.num_vars = self.num_pose_vars + int(sum(sizes))

        self.weights: List[np.ndarray] = []
        for obs in problem.observations:
            w = obs.confidence
            if problem.union_masks is not None:
                w = mask_confidence(
                    w, problem.union_masks[obs.i], problem.union_masks[obs.j], obs.pixels, obs.targets
                )
            self.weights.append(np.sqrt(w))

        # Prior residuals: (frame, anchor index, target inverse depth).
        self.prior_frames: List[int] = []
        self.prior_index: List[np.ndarray] = []
        self.prior_target: List[np.ndarray] = []
        if problem.prior_depths is not None and problem.depth_weight > 0:
            for t, prior in enumerate(problem.prior_depths):
                if prior is None:
                    continue
                depth = sample_depth(np.asarray(prior, dtype=np.float64), problem.anchors[t])
                use = np.isfinite(depth) & (depth > 0)
                if problem.union_masks is not None:
                    use &= ~_pixel_lookup(problem.union_masks[t], problem.anchors[t])
                index = np.nonzero(use)[0]
                if len(index):
                    self.prior_frames.append(t)
                    self.prior_index.append(index)
                    self.prior_target.append(1.0 / depth[index])
        self.num_prior = int(sum(len(i) for i in self.prior_index))
        self.num_residuals = 2 * sum(len(o.pixels) for o in problem.observations) + self.num_prior

    def pose_column(self, frame: int) -> Optional[int]:
        return None if frame == 0 else POSE_DOF * (frame - 1)


def _residuals(
    layout: _Layout,
    poses: Sequence[SE3Pose],
    inv_depths: Sequence[np.ndarray],
    with_jacobian: bool,
) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Stacked weighted residual vector and (optionally) its dense Jacobian."""
    problem = layout.problem
    intr = problem.intr
    residual = np.zeros(layout.num_residuals)
    jacobian = np.zeros((layout.num_residuals, layout.num_vars)) if with_jacobian else None
    row = 0

    for obs, sw in zip(problem.observations, layout.weights):
        k = len(obs.pixels)
        d = inv_depths[obs.i]
        ri, ti = poses[obs.i].rotation, poses[obs.i].translation
        rj, tj = poses[obs.j].rotation, poses[obs.j].translation
        xbar = (obs.pixels[:, 0] - intr.cx) / intr.fx
        ybar = (obs.pixels[:, 1] - intr.cy) / intr.fy
        xc = np.stack([xbar, ybar, np.ones(k)], axis=-1) / d[:, None]
        world = xc @ ri.T + ti
        y = (world - tj) @ rj
        z = y[:, 2]
        front = z > _BEHIND_EPS
        safe_z = np.where(front, z, 1.0)
        pred = np.stack(
            [intr.fx * y[:, 0] / safe_z + intr.cx, intr.fy * y[:, 1] / safe_z + intr.cy],
            axis=-1,
        )
        weight = sw * front[:, None]
        res = weight * (obs.targets - pred)
        res[~front] = 0.0
        residual[row : row + 2 * k] = res.reshape(-1)

        if jacobian is not None:
            jpi = np.zeros((k, 2, 3))
            jpi[:, 0, 0] = intr.fx / safe_z
            jpi[:, 0, 2] = -intr.fx * y[:, 0] / safe_z**2
            jpi[:, 1, 1] = intr.fy / safe_z
            jpi[:, 1, 2] = -intr.fy * y[:, 1] / safe_z**2
            dr_dy = -weight[:, :, None] * jpi
            dr_dx = dr_dy @ rj.T
            rows = row + 2 * np.arange(k)[:, None] + np.arange(2)[None, :]

            col_i = layout.pose_column(obs.i)
            if col_i is not None:
                block_t = dr_dx
                block_r = dr_dx @ (-ri @ so3_hat(xc))
                jacobian[rows[:, :, None], col_i + np.arange(3)[None, None, :]] += block_t
                jacobian[rows[:, :, None], col_i + 3 + np.arange(3)[None, None, :]] += block_r
            col_j = layout.pose_column(obs.j)
            if col_j is not None:
                block_t = dr_dy @ (-rj.T)
                block_r = dr_dy @ so3_hat(y)
                jacobian[rows[:, :, None], col_j + np.arange(3)[None, None, :]] += block_t
                jacobian[rows[:, :, None], col_j + 3 + np.arange(3)[None, None, :]] += block_r
            dx_dd = (-xc / d[:, None]) @ ri.T
            dr_dd = np.einsum("kab,kb->ka", dr_dx, dx_dd)
            depth_cols = layout.depth_offset[obs.i] + np.arange(k)
            jacobian[rows, depth_cols[:, None]] += dr_dd
        row += 2 * k

    sqrt_lambda = np.sqrt(problem.depth_weight)
    for t, index, target in zip(layout.prior_frames, layout.prior_index, layout.prior_target):
        n = len(index)
        residual[row : row + n] = sqrt_lambda * (inv_depths[t][index] - target)
        if jacobian is not None:
            jacobian[row + np.arange(n), layout.depth_offset[t] + index] = sqrt_lambda
        row += n

    return residual, jacobian


def cost(
    problem: BAProblem,
    poses: Optional[Sequence[SE3Pose]] = None,
    inv_depths: Optional[Sequence[np.ndarray]] = None,
) -> float:
    """Weighted reprojection cost plus the inverse-depth prior."""
    layout = _Layout(problem)
    residual, _ = _residuals(
        layout,
        problem.poses if poses is None else poses,
        problem.inv_depths if inv_depths is None else inv_depths,
        with_jacobian=False,
    )
    return float(residual @ residual)


def residuals_and_jacobian(
    problem: BAProblem,
    poses: Optional[Sequence[SE3Pose]] = None,
    inv_depths: Optional[Sequence[np.ndarray]] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Weighted residual vector and its Jacobian wrt the retraction increments."""
    layout = _Layout(problem)
    residual, jacobian = _residuals(
        layout,
        problem.poses if poses is None else poses,
        problem.inv_depths if inv_depths is None else inv_depths,
        with_jacobian=True,
    )
    assert jacobian is not None
    return residual, jacobian


def _retract(
    layout: _Layout,
    poses: Sequence[SE3Pose],
    inv_depths: Sequence[np.ndarray],
    delta: np.ndarray,
) -> Tuple[List[SE3Pose], List[np.ndarray]]:
    new_poses = [poses[0]]
    for t in range(1, len(poses)):
        col = POSE_DOF * (t - 1)
        step = delta[col : col + POSE_DOF]
        new_poses.append(
            SE3Pose(poses[t].rotation @ so3_exp(step[3:]), poses[t].translation + step[:3])
        )
    new_depths = [
        d + delta[layout.depth_offset[t] : layout.depth_offset[t] + len(d)]
        for t, d in enumerate(inv_depths)
    ]
    return new_poses, new_depths


def retract(
    problem: BAProblem,
    poses: Sequence[SE3Pose],
    inv_depths: Sequence[np.ndarray],
    delta: np.ndarray,
) -> Tuple[List[SE3Pose], List[np.ndarray]]:
    """Apply an increment vector laid out as [poses 1..T−1 (δt, δφ), depths]."""
    return _retract(_Layout(problem), poses, inv_depths, delta)


def solve(problem: BAProblem, config: Optional[SolverConfig] = None) -> BASolution:
    """Damped Gauss–Newton (Levenberg) on poses and inverse depths.

    Frame 0 stays fixed. A step is accepted only if the cost decreases; otherwise
    the damping grows tenfold. Converges when the relative cost change drops below
    `tol` or the cost falls below `cost_floor`.

    Args:
        problem: Bundle adjustment problem (initial values inside)
        config: Solver settings

    Returns:
        BASolution (converged False when damping exceeds its limit or the
        iteration budget runs out)

    Raises:
        DomainError: If the problem has fewer than 2 frames or no observation
    """
    config = config or SolverConfig()
    if problem.num_frames < 2 or not problem.observations:
        raise DomainError("Bundle adjustment needs at least 2 frames and 1 observation")

    layout = _Layout(problem)
    poses = list(problem.poses)
    depths = [d.copy() for d in problem.inv_depths]
    residual, jacobian = _residuals(layout, poses, depths, with_jacobian=True)
    current = float(residual @ residual)
    trace = [current]
    damping = float(config.damping_init)
    converged = False
    iterations = 0
    logger.info(
        f"Bundle adjustment: {problem.num_frames} frames, {layout.num_vars} unknowns, "
        f"{layout.num_residuals} residuals, initial cost {current:.6e}"
    )

    while iterations < config.max_iters:
        if current <= config.cost_floor:
            converged = True
            break
        assert jacobian is not None
        hessian = jacobian.T @ jacobian
        gradient = jacobian.T @ residual
        accepted = False
        stalled = False
        while damping <= config.damping_max:
            system = hessian + damping * np.eye(layout.num_vars)
            try:
                delta = -scipy.linalg.solve(system, gradient, assume_a="pos")
            except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
                logger.debug(f"Singular normal equations at damping {damping:.1e}")
                damping *= 10.0
                continue
            cand_poses, cand_depths = _retract(layout, poses, depths, delta)
            if any(np.any(d <= 0) for d in cand_depths):
                damping *= 10.0
                continue
            cand_residual, _ = _residuals(layout, cand_poses, cand_depths, with_jacobian=False)
            candidate = float(cand_residual @ cand_residual)
            if np.isfinite(candidate) and candidate < current:
                accepted = True
                break
            if np.isfinite(candidate) and candidate - current <= config.tol * current:
                stalled = True
                break
            damping *= 10.0

        if stalled:
            converged = True
            break
        if not accepted:
            logger.warning(
                f"Bundle adjustment stopped: damping {damping:.1e} exceeds {config.damping_max:.1e}"
            )
            break

        iterations += 1
        relative = (current - candidate) / max(current, np.finfo(float).tiny)
        poses, depths, current = cand_poses, cand_depths, candidate
        trace.append(current)
        logger.debug(f"BA iteration {iterations}: cost {current:.6e}, damping {damping:.1e}")
        damping = max(damping / 10.0, MIN_DAMPING)
        if relative < config.tol:
            converged = True
            break
        residual, jacobian = _residuals(layout, poses, depths, with_jacobian=True)

    if current <= config.cost_floor:
        converged = True
    if converged:
        logger.info(f"Bundle adjustment converged after {iterations} iterations, cost {current:.6e}")
    else:
        logger.warning(f"Bundle adjustment did not converge after {iterations} iterations")
    return BASolution(
        poses=tuple(poses),
        inv_depths=tuple(depths),
        cost_trace=tuple(trace),
        converged=converged,
        iterations=iterations,
        damping=damping,
        diagnostics={
            "optimizer": "levenberg",
            "iterations": iterations,
            "final_cost": current,
            "damping": damping,
        },
    )


def lift_world_points(
    poses: Sequence[SE3Pose],
    inv_depths: Sequence[np.ndarray],
    anchors: Sequence[np.ndarray],
    intr: Intrinsics,
    colors: Sequence[np.ndarray],
    human_flags: Sequence[np.ndarray],
) -> PointCloud:
    """P^w = G_t ∘ Π⁻¹(p, 1/d) for every anchor, with color and human flag."""
    xyz, rgb, human, source = [], [], [], []
    for t, (pose, d, pix) in enumerate(zip(poses, inv_depths, anchors)):
        pix = np.asarray(pix, dtype=np.float64).reshape(-1, 2)
        depth = 1.0 / np.asarray(d, dtype=np.float64)
        cam = np.stack(
            [
                (pix[:, 0] - intr.cx) * depth / intr.fx,
                (pix[:, 1] - intr.cy) * depth / intr.fy,
                depth,
            ],
            axis=-1,
        )
        xyz.append(pose.apply(cam))
        rgb.append(np.asarray(colors[t], dtype=np.float64).reshape(-1, 3))
        human.append(np.asarray(human_flags[t], dtype=np.float64).reshape(-1))
        source.append(np.stack([np.full(len(pix), t), np.arange(len(pix))], axis=-1))
    if not xyz:
        return PointCloud.empty()
    return PointCloud(
        np.concatenate(xyz), np.concatenate(rgb), np.concatenate(human), np.concatenate(source)
    )


def reprojection_errors(
    cloud: PointCloud,
    poses: Sequence[SE3Pose],
    intr: Intrinsics,
    observations: Sequence[FramePairObservation],
) -> np.ndarray:
    """Max reprojection error (px) of each point over the frames that observe it.

    Points with no positive-confidence observation get 0; a co-observation that
    lands behind the camera counts as infinite error.

    Raises:
        DomainError: If the cloud does not carry anchor source indices
    """
    if cloud.source is None:
        raise DomainError("Epipolar filtering needs points lifted from anchors")
    index = {(int(f), int(a)): n for n, (f, a) in enumerate(cloud.source)}
    worst = np.zeros(len(cloud))
    for obs in observations:
        rows = np.array([index.get((obs.i, k), -1) for k in range(len(obs.pixels))])
        use = (rows >= 0) & np.any(obs.confidence > 0, axis=1)
        if not np.any(use):
            continue
        pose = poses[obs.j]
        cam = (cloud.xyz[rows[use]] - pose.translation) @ pose.rotation
        uv, front = project_points(intr, cam)
        err = np.linalg.norm(obs.targets[use] - uv, axis=1)
        err[~front] = np.inf
        worst[rows[use]] = np.maximum(worst[rows[use]], err)
    return worst


def filter_epipolar(
    cloud: PointCloud,
    poses: Sequence[SE3Pose],
    intr: Intrinsics,
    observations: Sequence[FramePairObservation],
    tau_px: float,
) -> PointCloud:
    """Drop points whose worst reprojection into a co-observing frame exceeds tau_px.

    Raises:
        DomainError: If tau_px is not positive
    """
    if not tau_px > 0:
        raise DomainError(f"Epipolar threshold must be positive, got {tau_px}")
    errors = reprojection_errors(cloud, poses, intr, observations)
    keep = errors <= tau_px
    dropped = int((~keep).sum())
    if dropped:
        logger.info(f"Epipolar filter dropped {dropped}/{len(cloud)} points (tau={tau_px} px)")
    return cloud.select(keep)


def initial_inv_depths(
    prior_depths: Sequence[Optional[np.ndarray]], anchors: Sequence[np.ndarray]
) -> Tuple[np.ndarray, ...]:
    """1/D at each anchor, falling back to the frame's median where D is invalid."""
    inits = []
    for prior, pix in zip(prior_depths, anchors):
        if prior is None:
            inits.append(np.full(len(pix), 0.25))
            continue
        prior = np.asarray(prior, dtype=np.float64)
        depth = sample_depth(prior, pix)
        valid = np.isfinite(depth) & (depth > 0)
        finite = prior[np.isfinite(prior) & (prior > 0)]
        fallback = float(np.median(finite)) if finite.size else 4.0
        inits.append(1.0 / np.where(valid, depth, fallback))
    return tuple(inits)


def anchor_colors(rgb: Sequence[np.ndarray], anchors: Sequence[np.ndarray]) -> Tuple[np.ndarray, ...]:
    """RGB in [0, 1] at each anchor pixel."""
    colors = []
    for image, pix in zip(rgb, anchors):
        image = np.asarray(image)
        rows, cols, _ = _nearest_pixels(pix, image.shape)
        colors.append(image[rows, cols].astype(np.float64) / 255.0)
    return tuple(colors)


def anchor_human_flags(
    masks: Sequence[np.ndarray], anchors: Sequence[np.ndarray]
) -> Tuple[np.ndarray, ...]:
    """1.0 where the anchor lies inside any body mask, else 0.0."""
    return tuple(
        _pixel_lookup(np.asarray(mask) > 0, pix).astype(np.float64)
        for mask, pix in zip(masks, anchors)
    )
