"""Scene directory loading for the pipeline stages."""

import logging
from functools import cached_property
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .ba_core import (
    BAProblem,
    FramePairObservation,
    anchor_colors,
    anchor_human_flags,
    initial_inv_depths,
)
from .body_model import BodyTemplate, default_template, pose_mesh
from .depth_calibration import CalibrationFrame, frames_from_tracks
from .error_handler import InputError
from .formats import (
    frame_path,
    read_anchors,
    read_correspondences,
    read_depth,
    read_depth_sequence,
    read_intrinsics,
    read_json,
    read_mask,
    read_rgb,
    read_trajectory,
    read_tracks,
)
from .geometry import Intrinsics, PointCloud, SE3Pose, unproject_points
from .world_frame import BodyTrack

logger = logging.getLogger(__name__)


class SceneLoader:
    """Reads a scene directory lazily and checks that its parts agree."""

    def __init__(self, scene_dir: Union[str, Path]):
        """Initialize the loader.

        Args:
            scene_dir: Scene directory (see the layout in the docs)

        Raises:
            InputError: If the directory or its intrinsics are missing
        """
        self.scene_dir = Path(scene_dir)
        if not self.scene_dir.is_dir():
            raise InputError(f"Scene directory not found: {self.scene_dir}", file_path=str(self.scene_dir))
        self.frames_dir = self.scene_dir / "frames"
        self.gt_dir = self.scene_dir / "gt"
        logger.info(f"Loading scene from {self.scene_dir}")

    @cached_property
    def intrinsics(self) -> Intrinsics:
        return read_intrinsics(self.scene_dir / "intrinsics.json")

    @cached_property
    def anchors(self) -> Tuple[np.ndarray, ...]:
        return tuple(read_anchors(self.scene_dir / "anchors.jsonl"))

    @property
    def num_frames(self) -> int:
        return len(self.anchors)

    @cached_property
    def depths(self) -> Tuple[np.ndarray, ...]:
        """Uncalibrated depth D_t per frame."""
        depths = tuple(self._read_frames("depth", ".f32", read_depth))
        for t, depth in enumerate(depths):
            self._check_shape(depth.shape, frame_path(self.frames_dir, "depth", t, ".f32"), t)
        return depths

    @cached_property
    def masks(self) -> Tuple[np.ndarray, ...]:
        masks = tuple(self._read_frames("mask", ".pgm", read_mask))
        for t, mask in enumerate(masks):
            self._check_shape(mask.shape, frame_path(self.frames_dir, "mask", t, ".pgm"), t)
        return masks

    @cached_property
    def rgb(self) -> Tuple[np.ndarray, ...]:
        frames = tuple(self._read_frames("rgb", ".png", read_rgb))
        for t, image in enumerate(frames):
            self._check_shape(image.shape[:2], frame_path(self.frames_dir, "rgb", t, ".png"), t)
        return frames

    @cached_property
    def observations(self) -> Tuple[FramePairObservation, ...]:
        """Correspondences, checked against the anchors of their source frame."""
        path = self.scene_dir / "correspondences.jsonl"
        observations = tuple(read_correspondences(path))
        for obs in observations:
            if not (0 <= obs.i < self.num_frames and 0 <= obs.j < self.num_frames):
                raise InputError(
                    f"Correspondence ({obs.i}, {obs.j}) references a frame outside "
                    f"0..{self.num_frames - 1}",
                    file_path=str(path),
                    frame=obs.i,
                )
            if not np.array_equal(obs.pixels, self.anchors[obs.i]):
                raise InputError(
                    f"Correspondence ({obs.i}, {obs.j}) pixels differ from the anchors of frame {obs.i}",
                    file_path=str(path),
                    frame=obs.i,
                )
        return observations

    @cached_property
    def camera_tracks(self) -> Tuple[BodyTrack, ...]:
        path = self.scene_dir / "body_tracks_camera.jsonl"
        tracks = tuple(read_tracks(path, self.num_frames))
        for track in tracks:
            if track.frame_tag != "camera":
                raise InputError(f"Track {track.track_id} in {path} is not camera-frame", file_path=str(path))
        return tracks

    def _read_frames(self, prefix: str, suffix: str, reader: Any) -> List[np.ndarray]:
        return [
            reader(frame_path(self.frames_dir, prefix, t, suffix), frame=t)
            for t in range(self.num_frames)
        ]

    def _check_shape(self, shape: Sequence[int], path: Path, frame: int) -> None:
        if tuple(shape) != self.intrinsics.shape:
            raise InputError(
                f"{path} is {shape[1]}x{shape[0]}, intrinsics say "
                f"{self.intrinsics.width}x{self.intrinsics.height}",
                file_path=str(path),
                frame=frame,
            )

    def union_masks(self) -> Tuple[np.ndarray, ...]:
        return tuple(mask > 0 for mask in self.masks)

    def calibration_frames(self, template: Optional[BodyTemplate] = None) -> List[CalibrationFrame]:
        """Depth, masks and camera-frame meshes of each frame.

        Raises:
            InputError: If a mask holds more instances than there are tracks
        """
        try:
            return frames_from_tracks(list(self.depths), list(self.masks), self.camera_tracks, template)
        except ValueError as e:
            raise InputError(f"Masks and body tracks disagree: {e}", file_path=str(self.frames_dir))

    def ba_problem(
        self,
        prior_depths: Sequence[Optional[np.ndarray]],
        mask_dynamic: bool = True,
        use_depth_prior: bool = True,
        depth_weight: float = 1.0,
    ) -> BAProblem:
        """Bundle adjustment problem with identity poses and depths from the prior.

        Args:
            prior_depths: Per-frame depth used to initialize (and, if enabled, regularize)
            mask_dynamic: Pass the union masks so dynamic anchors are ignored
            use_depth_prior: Attach the inverse-depth prior term
            depth_weight: Prior weight λ

        Returns:
            BAProblem
        """
        return BAProblem(
            intr=self.intrinsics,
            poses=tuple(SE3Pose.identity() for _ in range(self.num_frames)),
            inv_depths=initial_inv_depths(prior_depths, self.anchors),
            anchors=self.anchors,
            observations=self.observations,
            union_masks=self.union_masks() if mask_dynamic else None,
            prior_depths=tuple(prior_depths) if use_depth_prior else None,
            depth_weight=depth_weight,
        )

    def anchor_colors(self) -> Tuple[np.ndarray, ...]:
        return anchor_colors(self.rgb, self.anchors)

    def anchor_human_flags(self) -> Tuple[np.ndarray, ...]:
        return anchor_human_flags(self.masks, self.anchors)

    # Ground truth ------------------------------------------------------------

    def has_ground_truth(self) -> bool:
        return (self.gt_dir / "trajectory.txt").is_file()

    def gt_trajectory(self) -> List[SE3Pose]:
        return read_trajectory(self.gt_dir / "trajectory.txt")[1]

    def gt_tracks(self) -> List[BodyTrack]:
        return read_tracks(self.gt_dir / "body_tracks_world.jsonl", self.num_frames)

    def gt_depths(self) -> List[np.ndarray]:
        return read_depth_sequence(self.gt_dir, self.num_frames)

    def gt_calibration(self) -> Dict[str, float]:
        data = read_json(self.gt_dir / "calibration.json")
        return {"s": float(data["s"]), "o": float(data["o"])}

    def scene_cloud(
        self,
        count: int = 1024,
        seed: int = 0,
        template: Optional[BodyTemplate] = None,
        human_points: int = 256,
    ) -> PointCloud:
        """World cloud from ground-truth frame 0 depth plus the first-frame body meshes.

        Used as the scene context when training the denoiser.

        Raises:
            InputError: If the scene carries no ground truth
        """
        if not self.has_ground_truth():
            raise InputError(f"Scene {self.scene_dir} has no ground truth", file_path=str(self.gt_dir))
        template = template or default_template()
        rng = np.random.Generator(np.random.PCG64(seed))
        pose = self.gt_trajectory()[0]
        depth = read_depth(frame_path(self.gt_dir, "depth", 0, ".f32"), frame=0)
        mask, rgb = self.masks[0], self.rgb[0]
        rows, cols = np.nonzero((mask == 0) & np.isfinite(depth))
        pick = np.sort(rng.choice(len(rows), size=min(count, len(rows)), replace=False))
        rows, cols = rows[pick], cols[pick]
        pixels = np.stack([cols, rows], axis=-1).astype(np.float64)
        xyz = [pose.apply(unproject_points(self.intrinsics, pixels, depth[rows, cols]))]
        colors = [rgb[rows, cols].astype(np.float64) / 255.0]
        human = [np.zeros(len(pick))]
        for track in self.gt_tracks():
            params = track.slots[0]
            if params is None:
                continue
            verts = pose_mesh(template, params, "world").vertices[:human_points]
            xyz.append(verts)
            colors.append(np.full((len(verts), 3), 0.5))
            human.append(np.ones(len(verts)))
        return PointCloud(np.concatenate(xyz), np.concatenate(colors), np.concatenate(human))
