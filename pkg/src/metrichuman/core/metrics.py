"""Evaluation metrics: MPJPE variants, acceleration error, ATE and depth accuracy.

Joint errors are reported in millimeters, trajectories in millimeters, depth RMSE
in meters.
"""

import logging
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .error_handler import DomainError
from .body_model import BodyTemplate, default_template, posed_joints
from .geometry import SE3Pose
from .world_frame import BodyTrack

logger = logging.getLogger(__name__)

ATE_ALIGNMENTS = ("rigid", "sim3", "none")
_DEGENERATE_SV = 1e-10


@dataclass(frozen=True)
class MetricsConfig:
    """Metric conventions."""

    mpjpe_with_scale: bool = True
    ate_align: str = "rigid"

    def __post_init__(self) -> None:
        if self.ate_align not in ATE_ALIGNMENTS:
            raise DomainError(f"ate_align must be one of {ATE_ALIGNMENTS}, got {self.ate_align}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "MetricsConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})


@dataclass(frozen=True)
class SimilarityAlignment:
    """x -> s R x + t."""

    scale: float
    rotation: np.ndarray
    translation: np.ndarray
    with_scale: bool = True

    def apply(self, points: np.ndarray) -> np.ndarray:
        return self.scale * np.asarray(points) @ self.rotation.T + self.translation


@dataclass
class MetricsReport:
    """Flat metric values; None where the inputs were not provided."""

    pa_mpjpe_mm: Optional[float] = None
    fa_mpjpe_mm: Optional[float] = None
    wa_mpjpe_mm: Optional[float] = None
    accel_mm_f2: Optional[float] = None
    ate_mm: Optional[float] = None
    delta1: Optional[float] = None
    delta2: Optional[float] = None
    delta3: Optional[float] = None
    rel: Optional[float] = None
    rmse_m: Optional[float] = None

    def to_dict(self) -> Dict[str, Optional[float]]:
        return asdict(self)


def procrustes(
    x: np.ndarray, y: np.ndarray, with_scale: bool = True, allow_degenerate: bool = False
) -> SimilarityAlignment:
    """Least-squares similarity (or rigid) alignment taking X onto Y.

    Args:
        x: N×3 source points
        y: N×3 target points
        with_scale: Estimate a scale; otherwise s = 1
        allow_degenerate: Accept collinear inputs (the rotation is then not unique)

    Returns:
        SimilarityAlignment minimizing Σ‖s R x + t − y‖²

    Raises:
        DomainError: On shape mismatch, fewer than 3 points or a degenerate configuration
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1, 3)
    y = np.asarray(y, dtype=np.float64).reshape(-1, 3)
    if x.shape != y.shape:
        raise DomainError(f"Procrustes point sets differ in shape: {x.shape} vs {y.shape}")
    if len(x) < 3 and not allow_degenerate:
        raise DomainError(f"Procrustes needs at least 3 points, got {len(x)}")
    mu_x = x.mean(axis=0)
    mu_y = y.mean(axis=0)
    xc = x - mu_x
    yc = y - mu_y
    var_x = float((xc**2).sum())
    if var_x == 0.0:
        if not allow_degenerate:
            raise DomainError("Procrustes source points coincide")
        return SimilarityAlignment(1.0, np.eye(3), mu_y - mu_x, with_scale)

    cov = yc.T @ xc
    u, sv, vt = np.linalg.svd(cov)
    if not allow_degenerate and sv[1] <= _DEGENERATE_SV * max(sv[0], 1.0):
        raise DomainError("Procrustes configuration is degenerate (collinear points)")
    correction = np.eye(3)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        correction[2, 2] = -1.0
    rotation = u @ correction @ vt
    scale = float(np.trace(np.diag(sv) @ correction) / var_x) if with_scale else 1.0
    translation = mu_y - scale * rotation @ mu_x
    return SimilarityAlignment(scale, rotation, translation, with_scale)


def _check_joint_shapes(pred: np.ndarray, gt: np.ndarray) -> tuple:
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape or pred.ndim != 3 or pred.shape[-1] != 3:
        raise DomainError(f"Joint sequences must both be T×J×3, got {pred.shape} and {gt.shape}")
    if not (np.all(np.isfinite(pred)) and np.all(np.isfinite(gt))):
        raise DomainError("Joint sequences contain non-finite values")
    return pred, gt


def _frame_mask(mask: Optional[np.ndarray], num_frames: int) -> np.ndarray:
    if mask is None:
        return np.ones(num_frames, dtype=bool)
    mask = np.asarray(mask, dtype=bool).reshape(-1)
    if mask.shape != (num_frames,):
        raise DomainError(f"Validity mask must have {num_frames} entries, got {mask.shape}")
    if not mask.any():
        raise DomainError("Validity mask selects no frame")
    return mask


def _mean_joint_error_mm(pred: np.ndarray, gt: np.ndarray) -> float:
    return float(np.linalg.norm(pred - gt, axis=-1).mean() * 1000.0)


def pa_mpjpe(pred: np.ndarray, gt: np.ndarray, mask: Optional[np.ndarray] = None) -> float:
    """Mean joint error after per-frame similarity alignment (mm)."""
    pred, gt = _check_joint_shapes(pred, gt)
    valid = _frame_mask(mask, len(pred))
    errors = []
    for p, g in zip(pred[valid], gt[valid]):
        aligned = procrustes(p, g, with_scale=True).apply(p)
        errors.append(np.linalg.norm(aligned - g, axis=-1).mean())
    return float(np.mean(errors) * 1000.0)


def wa_mpjpe(
    pred: np.ndarray,
    gt: np.ndarray,
    with_scale: bool = True,
    mask: Optional[np.ndarray] = None,
) -> float:
    """Mean joint error after one alignment over the whole trajectory (mm)."""
    pred, gt = _check_joint_shapes(pred, gt)
    valid = _frame_mask(mask, len(pred))
    p, g = pred[valid], gt[valid]
    alignment = procrustes(p.reshape(-1, 3), g.reshape(-1, 3), with_scale=with_scale)
    return _mean_joint_error_mm(alignment.apply(p), g)


def fa_mpjpe(
    pred: np.ndarray,
    gt: np.ndarray,
    with_scale: bool = True,
    mask: Optional[np.ndarray] = None,
) -> float:
    """Mean joint error after aligning on the first valid frame only (mm)."""
    pred, gt = _check_joint_shapes(pred, gt)
    valid = _frame_mask(mask, len(pred))
    first = int(np.argmax(valid))
    alignment = procrustes(pred[first], gt[first], with_scale=with_scale)
    return _mean_joint_error_mm(alignment.apply(pred[valid]), gt[valid])


def accel_error(pred: np.ndarray, gt: np.ndarray, mask: Optional[np.ndarray] = None) -> float:
    """Mean norm of the second-difference mismatch (mm/frame²).

    With a mask, only interior steps whose three frames are all valid count.
    """
    pred, gt = _check_joint_shapes(pred, gt)
    if len(pred) < 3:
        raise DomainError(f"Acceleration error needs at least 3 frames, got {len(pred)}")
    valid = _frame_mask(mask, len(pred))
    acc_pred = pred[2:] - 2.0 * pred[1:-1] + pred[:-2]
    acc_gt = gt[2:] - 2.0 * gt[1:-1] + gt[:-2]
    steps = valid[2:] & valid[1:-1] & valid[:-2]
    if not steps.any():
        raise DomainError("No three consecutive valid frames for acceleration error")
    diff = np.linalg.norm(acc_pred[steps] - acc_gt[steps], axis=-1)
    return float(diff.mean() * 1000.0)


def ate(
    pred_traj: Sequence[SE3Pose], gt_traj: Sequence[SE3Pose], align: str = "rigid"
) -> float:
    """RMSE of camera positions after alignment (mm).

    Args:
        pred_traj: Estimated camera-to-world poses
        gt_traj: Ground-truth camera-to-world poses
        align: "rigid" (no scale), "sim3" or "none"

    Raises:
        DomainError: On length mismatch, fewer than 2 poses or an unknown alignment
    """
    if align not in ATE_ALIGNMENTS:
        raise DomainError(f"Unknown ATE alignment: {align}")
    if len(pred_traj) != len(gt_traj):
        raise DomainError(f"Trajectory lengths differ: {len(pred_traj)} vs {len(gt_traj)}")
    if len(pred_traj) < 2:
        raise DomainError("ATE needs at least 2 poses")
    pred = np.stack([p.translation for p in pred_traj])
    gt = np.stack([g.translation for g in gt_traj])
    if align != "none":
        alignment = procrustes(pred, gt, with_scale=align == "sim3", allow_degenerate=True)
        pred = alignment.apply(pred)
    return float(np.sqrt(np.mean(np.sum((pred - gt) ** 2, axis=-1))) * 1000.0)


def depth_metrics(pred: np.ndarray, gt: np.ndarray) -> Dict[str, float]:
    """Threshold accuracy, mean relative error and RMSE over jointly valid pixels.

    Raises:
        DomainError: On shape mismatch or when no pixel is valid in both maps
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise DomainError(f"Depth maps differ in shape: {pred.shape} vs {gt.shape}")
    valid = np.isfinite(pred) & np.isfinite(gt) & (pred > 0) & (gt > 0)
    if not valid.any():
        raise DomainError("No jointly valid depth pixels")
    p = pred[valid]
    g = gt[valid]
    ratio = np.maximum(p / g, g / p)
    return {
        "delta1": float(np.mean(ratio < 1.25)),
        "delta2": float(np.mean(ratio < 1.25**2)),
        "delta3": float(np.mean(ratio < 1.25**3)),
        "rel": float(np.mean(np.abs(p - g) / g)),
        "rmse": float(np.sqrt(np.mean((p - g) ** 2))),
    }


def depth_metrics_sequence(preds: Sequence[np.ndarray], gts: Sequence[np.ndarray]) -> Dict[str, float]:
    """Depth metrics pooled over all jointly valid pixels of a frame sequence."""
    if len(preds) != len(gts) or not preds:
        raise DomainError(f"Depth sequences differ in length: {len(preds)} vs {len(gts)}")
    pred = np.concatenate([np.asarray(p, dtype=np.float64).reshape(-1) for p in preds])
    gt = np.concatenate([np.asarray(g, dtype=np.float64).reshape(-1) for g in gts])
    return depth_metrics(pred, gt)


def joint_metrics(
    pred: np.ndarray,
    gt: np.ndarray,
    config: Optional[MetricsConfig] = None,
    mask: Optional[np.ndarray] = None,
) -> Dict[str, float]:
    """PA/WA/FA-MPJPE for one track, plus acceleration error when three
    consecutive frames are valid."""
    config = config or MetricsConfig()
    result = {
        "pa_mpjpe_mm": pa_mpjpe(pred, gt, mask),
        "wa_mpjpe_mm": wa_mpjpe(pred, gt, config.mpjpe_with_scale, mask),
        "fa_mpjpe_mm": fa_mpjpe(pred, gt, config.mpjpe_with_scale, mask),
    }
    if len(pred) >= 3:
        try:
            result["accel_mm_f2"] = accel_error(pred, gt, mask)
        except DomainError:
            logger.warning("Too few consecutive valid frames for acceleration error")
    return result


def track_joints(
    track: BodyTrack, template: Optional[BodyTemplate] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """T×J×3 regressed joints of a track and its observed-frame mask (zeros where missing)."""
    template = template or default_template()
    joints = np.zeros((track.num_frames, template.num_joints, 3))
    for t, slot in enumerate(track.slots):
        if slot is not None:
            joints[t] = posed_joints(template, slot)
    return joints, track.observed()


def track_metrics(
    pred_tracks: Sequence[BodyTrack],
    gt_tracks: Sequence[BodyTrack],
    config: Optional[MetricsConfig] = None,
    template: Optional[BodyTemplate] = None,
) -> Dict[str, float]:
    """Joint metrics averaged over tracks matched by id.

    Frames missing from either track are masked out. Acceleration error is
    averaged over the tracks that have three consecutive valid frames.

    Raises:
        DomainError: If a ground-truth track has no prediction or lengths differ
    """
    config = config or MetricsConfig()
    template = template or default_template()
    predicted = {track.track_id: track for track in pred_tracks}
    per_track: List[Dict[str, float]] = []
    for gt_track in gt_tracks:
        pred_track = predicted.get(gt_track.track_id)
        if pred_track is None:
            raise DomainError(f"No predicted track for ground-truth track {gt_track.track_id}")
        if pred_track.num_frames != gt_track.num_frames:
            raise DomainError(
                f"Track {gt_track.track_id} lengths differ: "
                f"{pred_track.num_frames} vs {gt_track.num_frames}"
            )
        pred, pred_mask = track_joints(pred_track, template)
        gt, gt_mask = track_joints(gt_track, template)
        per_track.append(joint_metrics(pred, gt, config, pred_mask & gt_mask))
    if not per_track:
        raise DomainError("No tracks to evaluate")
    keys = sorted({key for values in per_track for key in values})
    return {key: float(np.mean([v[key] for v in per_track if key in v])) for key in keys}


def build_report(
    pred_traj: Optional[Sequence[SE3Pose]] = None,
    gt_traj: Optional[Sequence[SE3Pose]] = None,
    pred_tracks: Optional[Sequence[BodyTrack]] = None,
    gt_tracks: Optional[Sequence[BodyTrack]] = None,
    pred_depths: Optional[Sequence[np.ndarray]] = None,
    gt_depths: Optional[Sequence[np.ndarray]] = None,
    config: Optional[MetricsConfig] = None,
    template: Optional[BodyTemplate] = None,
) -> MetricsReport:
    """Fill a report from whichever prediction/ground-truth pairs are given."""
    config = config or MetricsConfig()
    report = MetricsReport()
    if pred_traj is not None and gt_traj is not None:
        report.ate_mm = ate(pred_traj, gt_traj, config.ate_align)
    if pred_tracks is not None and gt_tracks is not None:
        for key, value in track_metrics(pred_tracks, gt_tracks, config, template).items():
            setattr(report, key, value)
    if pred_depths is not None and gt_depths is not None:
        depth = depth_metrics_sequence(pred_depths, gt_depths)
        report.delta1 = depth["delta1"]
        report.delta2 = depth["delta2"]
        report.delta3 = depth["delta3"]
        report.rel = depth["rel"]
        report.rmse_m = depth["rmse"]
    logger.info(f"Metrics: {', '.join(f'{k}={v:.4f}' for k, v in report.to_dict().items() if v is not None)}")
    return report
