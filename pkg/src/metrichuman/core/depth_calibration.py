"""Human-aware depth calibration: fit one global scale and offset of a depth video."""

import logging
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import ConvexHull, QhullError

from .body_model import BodyMesh, BodyTemplate, default_template, pose_mesh
from .error_handler import DomainError, NoSupportError, NumericalError
from .geometry import Intrinsics, project_points, validate_instance_mask
from .world_frame import BodyTrack

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CalibrationConfig:
    """Calibration settings."""

    lambda_size: float = 1.0
    max_iters: int = 30
    grad_tol: float = 1e-8
    rel_tol: float = 1e-10
    splat_radius: int = 2
    fd_step: float = 1e-6
    init_scale: float = 1.0
    init_offset: float = 0.0

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CalibrationConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})


@dataclass(frozen=True)
class CalibrationFrame:
    """Uncalibrated depth, instance mask and camera-frame meshes of one frame.

    Mesh n corresponds to instance id n + 1 in the mask.
    """

    depth: np.ndarray
    masks: np.ndarray
    meshes: Tuple[BodyMesh, ...]

    def __post_init__(self) -> None:
        depth = np.asarray(self.depth, dtype=np.float64)
        masks = validate_instance_mask(self.masks, len(self.meshes))
        if depth.shape != masks.shape:
            raise DomainError(
                f"Depth {depth.shape} and mask {masks.shape} shapes differ"
            )
        object.__setattr__(self, "depth", depth)
        object.__setattr__(self, "masks", masks)
        object.__setattr__(self, "meshes", tuple(self.meshes))


@dataclass(frozen=True)
class RasterResult:
    """Rasterized coverage mask and nearest depth (NaN where uncovered)."""

    mask: np.ndarray
    zbuf: np.ndarray


@dataclass(frozen=True)
class CalibrationResult:
    """Recovered scale and offset with optimizer status."""

    s: float
    o: float
    final_energy: float
    iterations: int
    converged: bool

    def __post_init__(self) -> None:
        if not self.s > 0:
            raise DomainError(f"Calibration scale must be positive, got {self.s}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def rasterize_points(
    points: np.ndarray, intr: Intrinsics, radius: int = 2
) -> RasterResult:
    """Z-buffered splatting of 3D points as pixel discs of the given radius.

    Points with z <= 0 are skipped. Pixel (col, row) has its center at (u, v) =
    (col, row).
    """
    uv, valid = project_points(intr, points)
    z = np.asarray(points, dtype=np.float64).reshape(-1, 3)[valid, 2]
    uv = uv[valid]
    zbuf = np.full((intr.height, intr.width), np.inf)

    if len(z):
        base_u = np.floor(uv[:, 0])
        base_v = np.floor(uv[:, 1])
        r2 = float(radius) ** 2
        for dv in range(-radius, radius + 2):
            for du in range(-radius, radius + 2):
                pu = base_u + du
                pv = base_v + dv
                inside = (
                    ((pu - uv[:, 0]) ** 2 + (pv - uv[:, 1]) ** 2 <= r2)
                    & (pu >= 0)
                    & (pu < intr.width)
                    & (pv >= 0)
                    & (pv < intr.height)
                )
                np.minimum.at(
                    zbuf,
                    (pv[inside].astype(np.int64), pu[inside].astype(np.int64)),
                    z[inside],
                )

    mask = np.isfinite(zbuf)
    zbuf[~mask] = np.nan
    return RasterResult(mask=mask, zbuf=zbuf)


def rasterize(mesh: BodyMesh, intr: Intrinsics, radius: int = 2) -> RasterResult:
    """Rasterize a camera-frame body mesh by vertex splatting."""
    return rasterize_points(mesh.vertices, intr, radius)


def overlap_mask(raster: RasterResult, inst: np.ndarray, n: int) -> np.ndarray:
    """S = ρ(V) ∩ (inst == n)."""
    inst = np.asarray(inst)
    if inst.shape != raster.mask.shape:
        raise DomainError(
            f"Mask shape {inst.shape} does not match raster {raster.mask.shape}"
        )
    return raster.mask & (inst == n)


def rasterize_frames(
    frames: Sequence[CalibrationFrame], intr: Intrinsics, radius: int = 2
) -> List[List[RasterResult]]:
    """Rasterize every mesh of every frame, in frame order."""
    return [[rasterize(mesh, intr, radius) for mesh in frame.meshes] for frame in frames]


def extent(
    pixels: np.ndarray, depths: np.ndarray, intr: Intrinsics, axis: str
) -> float:
    """Spread (max − min) of the unprojected x or y coordinate of a pixel set.

    Raises:
        DomainError: If the pixel set is empty or the axis is unknown
    """
    pixels = np.asarray(pixels, dtype=np.float64).reshape(-1, 2)
    depths = np.asarray(depths, dtype=np.float64).reshape(-1)
    if len(pixels) == 0:
        raise DomainError("Cannot take the extent of an empty pixel set")
    if axis == "x":
        coords = (pixels[:, 0] - intr.cx) * depths / intr.fx
    elif axis == "y":
        coords = (pixels[:, 1] - intr.cy) * depths / intr.fy
    else:
        raise DomainError(f"Unknown extent axis {axis!r}")
    return float(coords.max() - coords.min())


@dataclass(frozen=True)
class _Support:
    """Overlap pixels of one (human, frame) pair."""

    frame: int
    human: int
    xbar: np.ndarray
    ybar: np.ndarray
    mesh_depth: np.ndarray
    raw_depth: np.ndarray
    mesh_extent_x: float
    mesh_extent_y: float


class CalibrationEnergy:
    """E(s, o) = E_depth + λ·E_size over a fixed set of frames."""

    def __init__(
        self,
        frames: Sequence[CalibrationFrame],
        intr: Intrinsics,
        lambda_size: float = 1.0,
        rasters: Optional[Sequence[Sequence[RasterResult]]] = None,
        radius: int = 2,
        fd_step: float = 1e-6,
    ):
        """Collect the overlap pixels S_nt of every (human, frame).

        Args:
            frames: Calibration frames
            intr: Camera intrinsics
            lambda_size: Weight of the body-size term
            rasters: Precomputed rasters per frame and mesh (computed if None)
            radius: Splat radius used when rasterizing
            fd_step: Central-difference step for the size-term gradient

        Raises:
            NoSupportError: If no overlap pixel exists in any frame
        """
        self.intr = intr
        self.lambda_size = float(lambda_size)
        self.fd_step = float(fd_step)
        if rasters is None:
            rasters = rasterize_frames(frames, intr, radius)
        self.supports: List[_Support] = []
        # N·T: a missing detection still counts in the average
        self.num_pairs = max((len(f.meshes) for f in frames), default=0) * len(frames)
        for t, (frame, frame_rasters) in enumerate(zip(frames, rasters)):
            if len(frame_rasters) != len(frame.meshes):
                raise DomainError(f"Frame {t}: raster count does not match meshes")
            for n, raster in enumerate(frame_rasters):
                support = overlap_mask(raster, frame.masks, n + 1) & np.isfinite(frame.depth)
                rows, cols = np.nonzero(support)
                if len(rows) == 0:
                    logger.debug(f"Frame {t}, human {n}: empty overlap")
                    continue
                pixels = np.stack([cols, rows], axis=-1).astype(np.float64)
                mesh_depth = raster.zbuf[rows, cols]
                self.supports.append(
                    _Support(
                        frame=t,
                        human=n,
                        xbar=(pixels[:, 0] - intr.cx) / intr.fx,
                        ybar=(pixels[:, 1] - intr.cy) / intr.fy,
                        mesh_depth=mesh_depth,
                        raw_depth=frame.depth[rows, cols],
                        mesh_extent_x=extent(pixels, mesh_depth, intr, "x"),
                        mesh_extent_y=extent(pixels, mesh_depth, intr, "y"),
                    )
                )
        if not self.supports:
            raise NoSupportError("No overlap pixels between body rasters and masks")

        self._z = np.concatenate([sp.mesh_depth for sp in self.supports])
        self._d = np.concatenate([sp.raw_depth for sp in self.supports])
        self.num_pixels = int(self._z.size)
        logger.debug(
            f"Calibration support: {self.num_pixels} pixels over "
            f"{len(self.supports)}/{self.num_pairs} (human, frame) pairs"
        )

    def depth_term(self, s: float, o: float) -> float:
        residual = self._z - (s * self._d + o)
        return float(np.dot(residual, residual) / self.num_pixels)

    def depth_gradient(self, s: float, o: float) -> np.ndarray:
        """Analytic (∂/∂s, ∂/∂o) of E_depth."""
        residual = self._z - (s * self._d + o)
        return np.array(
            [
                -2.0 * np.dot(residual, self._d) / self.num_pixels,
                -2.0 * residual.sum() / self.num_pixels,
            ]
        )

    def size_term(self, s: float, o: float) -> float:
        """Extent mismatch summed over supported pairs, divided by N·T."""
        total = 0.0
        for sp in self.supports:
            depth = s * sp.raw_depth + o
            x = sp.xbar * depth
            y = sp.ybar * depth
            dx = sp.mesh_extent_x - (x.max() - x.min())
            dy = sp.mesh_extent_y - (y.max() - y.min())
            total += dx * dx + dy * dy
        return total / self.num_pairs

    def size_gradient(self, s: float, o: float) -> np.ndarray:
        h = self.fd_step
        return np.array(
            [
                (self.size_term(s + h, o) - self.size_term(s - h, o)) / (2 * h),
                (self.size_term(s, o + h) - self.size_term(s, o - h)) / (2 * h),
            ]
        )

    def total(self, s: float, o: float) -> float:
        return self.depth_term(s, o) + self.lambda_size * self.size_term(s, o)

    def gradient(self, s: float, o: float) -> np.ndarray:
        return self.depth_gradient(s, o) + self.lambda_size * self.size_gradient(s, o)

    def depth_on_grid(self, s: np.ndarray, o: np.ndarray) -> np.ndarray:
        """E_depth at every grid point via its quadratic sufficient statistics."""
        z, d, n = self._z, self._d, self.num_pixels
        szz, szd, sz = np.dot(z, z), np.dot(z, d), z.sum()
        sdd, sd = np.dot(d, d), d.sum()
        return (
            szz - 2 * s * szd - 2 * o * sz + s * s * sdd + 2 * s * o * sd + o * o * n
        ) / n

    def size_on_grid(self, s: np.ndarray, o: np.ndarray) -> np.ndarray:
        """E_size at every grid point.

        The extent is max − min of a_k·s + b_k·o over pixels, so only the convex
        hull of the points (a_k, b_k) matters.
        """
        total = np.zeros(np.broadcast(s, o).shape)
        flat_s = np.ravel(np.broadcast_to(s, total.shape))
        flat_o = np.ravel(np.broadcast_to(o, total.shape))
        for sp in self.supports:
            for bar, target in ((sp.xbar, sp.mesh_extent_x), (sp.ybar, sp.mesh_extent_y)):
                coeffs = _hull_points(np.stack([bar * sp.raw_depth, bar], axis=-1))
                values = flat_s[:, None] * coeffs[None, :, 0] + flat_o[:, None] * coeffs[None, :, 1]
                diff = target - (values.max(axis=1) - values.min(axis=1))
                total += (diff * diff).reshape(total.shape)
        return total / self.num_pairs

    def total_on_grid(self, s: np.ndarray, o: np.ndarray) -> np.ndarray:
        return self.depth_on_grid(s, o) + self.lambda_size * self.size_on_grid(s, o)


def _hull_points(points: np.ndarray) -> np.ndarray:
    """Convex hull vertices of a 2-D point set (all unique points if degenerate)."""
    unique = np.unique(points, axis=0)
    if len(unique) < 3:
        return unique
    try:
        return unique[ConvexHull(unique).vertices]
    except QhullError:
        return unique


def e_depth(
    frames: Sequence[CalibrationFrame],
    rasters: Sequence[Sequence[RasterResult]],
    s: float,
    o: float,
    intr: Optional[Intrinsics] = None,
) -> float:
    """Mean squared z-difference between mesh and scaled depth over all overlaps.

    Raises:
        NoSupportError: If the total overlap is empty
    """
    if intr is None:
        height, width = frames[0].depth.shape
        intr = Intrinsics.from_image_size(width, height)
    return CalibrationEnergy(frames, intr, rasters=rasters).depth_term(s, o)


def e_size(
    frames: Sequence[CalibrationFrame],
    rasters: Sequence[Sequence[RasterResult]],
    s: float,
    o: float,
    intr: Intrinsics,
) -> float:
    """Squared body-extent mismatch (x and y) averaged over N·T.

    N is the largest number of humans in any frame and T the number of frames, so a
    frame missing a detection contributes zero to the sum but still counts.
    """
    return CalibrationEnergy(frames, intr, rasters=rasters).size_term(s, o)


def calibrate(
    frames: Sequence[CalibrationFrame],
    intr: Intrinsics,
    config: Optional[CalibrationConfig] = None,
    rasters: Optional[Sequence[Sequence[RasterResult]]] = None,
) -> CalibrationResult:
    """Minimize E_depth + λ·E_size over (s, o) with L-BFGS.

    The optimizer runs in (log s, o) so the scale stays positive.

    Args:
        frames: Calibration frames
        intr: Camera intrinsics
        config: Calibration settings (λ, iterations, tolerances)
        rasters: Optional precomputed rasters

    Returns:
        CalibrationResult

    Raises:
        NoSupportError: If no overlap pixel exists
        NumericalError: If the energy becomes non-finite
    """
    config = config or CalibrationConfig()
    energy = CalibrationEnergy(
        frames,
        intr,
        lambda_size=config.lambda_size,
        rasters=rasters,
        radius=config.splat_radius,
        fd_step=config.fd_step,
    )
    evaluations = {"count": 0}

    def objective(x: np.ndarray) -> Tuple[float, np.ndarray]:
        s, o = float(np.exp(x[0])), float(x[1])
        value = energy.total(s, o)
        grad = energy.gradient(s, o)
        evaluations["count"] += 1
        if not (np.isfinite(value) and np.all(np.isfinite(grad))):
            raise NumericalError(
                f"Calibration energy is not finite at s={s}, o={o}",
                diagnostics={
                    "optimizer": "L-BFGS-B",
                    "s": s,
                    "o": o,
                    "energy": value,
                    "evaluations": evaluations["count"],
                },
            )
        logger.debug(f"Calibration eval {evaluations['count']}: s={s:.6f} o={o:.6f} E={value:.3e}")
        return value, np.array([grad[0] * s, grad[1]])

    x0 = np.array([np.log(config.init_scale), config.init_offset])
    result = minimize(
        objective,
        x0,
        jac=True,
        method="L-BFGS-B",
        options={
            "maxiter": config.max_iters,
            "gtol": config.grad_tol,
            "ftol": config.rel_tol,
        },
    )
    s, o = float(np.exp(result.x[0])), float(result.x[1])
    calibration = CalibrationResult(
        s=s,
        o=o,
        final_energy=float(energy.total(s, o)),
        iterations=int(result.nit),
        converged=bool(result.success),
    )
    if calibration.converged:
        logger.info(
            f"Calibrated depth: s={s:.6f}, o={o:.6f}, "
            f"E={calibration.final_energy:.3e} after {calibration.iterations} iterations"
        )
    else:
        logger.warning(f"Calibration did not converge: {result.message}")
    return calibration


def apply_calibration(depth: np.ndarray, s: float, o: float) -> np.ndarray:
    """D^m = s·D + o; NaN stays NaN and non-positive results become NaN.

    Raises:
        DomainError: If s <= 0
    """
    if not s > 0:
        raise DomainError(f"Calibration scale must be positive, got {s}")
    calibrated = s * np.asarray(depth, dtype=np.float64) + o
    calibrated[~(calibrated > 0)] = np.nan
    return calibrated


def frames_from_tracks(
    depths: Sequence[np.ndarray],
    masks: Sequence[np.ndarray],
    tracks: Sequence[BodyTrack],
    template: Optional[BodyTemplate] = None,
) -> List[CalibrationFrame]:
    """Pair each frame's depth and instance mask with the meshes observed in it.

    Track n owns instance id n + 1. Instances whose track has no detection in a
    frame are dropped from that frame's mask and the remaining ids are packed so
    that mesh k keeps id k + 1.
    """
    template = template or default_template()
    frames = []
    for t, (depth, mask) in enumerate(zip(depths, masks)):
        mask = validate_instance_mask(mask, len(tracks))
        packed = np.zeros_like(mask)
        meshes = []
        for n, track in enumerate(tracks):
            if track.frame_tag != "camera":
                raise DomainError(f"Track {track.track_id} is not in the camera frame")
            params = track.slots[t] if t < track.num_frames else None
            if params is None:
                continue
            meshes.append(pose_mesh(template, params, "camera"))
            packed[mask == n + 1] = len(meshes)
        frames.append(CalibrationFrame(depth=depth, masks=packed, meshes=tuple(meshes)))
    return frames
