"""Stage orchestration: synth, calibrate, slam, place, denoise, train and eval.

Every stage reads its inputs from disk, writes its outputs under the output
directory and returns a JSON-compatible summary.
"""

import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Callable, Dict, Iterator, List, Optional, Union

from ..config.settings import PipelineSettings
from ..denoiser import (
    DenoiserConfig,
    DenoiserTrainer,
    MotionDiscriminator,
    build_model,
    denoise,
    load_model,
    save_model,
)
from ..denoiser.kinematics import TorchBodyModel
from ..denoiser.training import synthetic_sequences
from .ba_core import SolverConfig, filter_epipolar, lift_world_points, solve
from .body_model import BodyTemplate, default_template, pose_mesh
from .depth_calibration import CalibrationConfig, apply_calibration, calibrate
from .error_handler import InputError, NumericalError
from .formats import (
    read_depth_sequence,
    read_point_cloud,
    read_trajectory,
    read_tracks,
    write_depth_sequence,
    write_json,
    write_mesh,
    write_point_cloud,
    write_scene,
    write_trajectory,
    write_tracks,
)
from .loader import SceneLoader
from .metrics import MetricsConfig, build_report
from .synth import SynthConfig, generate
from .world_frame import BodyTrack, interpolate_track, track_to_world

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class HumanSlamPipeline:
    """Runs the metric SLAM and body placement stages on scene directories."""

    def __init__(
        self,
        settings: Optional[PipelineSettings] = None,
        out_dir: PathLike = ".",
        template: Optional[BodyTemplate] = None,
    ):
        """Initialize the pipeline.

        Args:
            settings: Pipeline settings (defaults when omitted)
            out_dir: Directory that receives every stage's outputs
            template: Body template (defaults to the procedural template)
        """
        self.settings = settings or PipelineSettings()
        self.out_dir = Path(out_dir)
        self.template = template or default_template()
        self.current_stage: Optional[str] = None

        # Callbacks
        self.on_progress: Optional[Callable[[str, float], None]] = None
        self.on_stage_completed: Optional[Callable[[str, Dict[str, Any]], None]] = None

    def _notify_progress(self, message: str, progress: float) -> None:
        logger.info(message)
        if self.on_progress:
            self.on_progress(message, progress)

    @contextmanager
    def _stage(self, name: str) -> Iterator[None]:
        """Track the running stage and tag numerical failures with it."""
        self.current_stage = name
        self._notify_progress(f"Stage {name} started", 0.0)
        try:
            yield
        except NumericalError as e:
            e.diagnostics.setdefault("stage", name)
            raise
        finally:
            self.current_stage = None

    def _finish(self, name: str, summary: Dict[str, Any]) -> Dict[str, Any]:
        summary = {"stage": name, **summary}
        self._notify_progress(f"Stage {name} finished", 1.0)
        if self.on_stage_completed:
            self.on_stage_completed(name, summary)
        return summary

    # ------------------------------------------------------------------ synth

    def synth(self, seed: Optional[int] = None) -> Dict[str, Any]:
        """Generate a synthetic scenario and write it as a scene directory."""
        seed = self.settings.seed if seed is None else seed
        with self._stage("synth"):
            scenario = generate(seed, SynthConfig.from_dict(self.settings.section("synth")), self.template)
            write_scene(self.out_dir, scenario)
        return self._finish(
            "synth",
            {
                "seed": seed,
                "frames": scenario.num_frames,
                "tracks": len(scenario.gt_tracks),
                "observations": len(scenario.observations),
                "scale": scenario.scale,
                "offset": scenario.offset,
                "scene_dir": str(self.out_dir),
            },
        )

    # -------------------------------------------------------------- calibrate

    def calibrate(self, scene_dir: PathLike) -> Dict[str, Any]:
        """Recover (s, o) and write calibration.json plus the metric depth maps."""
        with self._stage("calibrate"):
            loader = SceneLoader(scene_dir)
            config = CalibrationConfig.from_dict(self.settings.section("calibration"))
            frames = loader.calibration_frames(self.template)
            self._notify_progress(f"Calibrating depth over {len(frames)} frames", 0.2)
            result = calibrate(frames, loader.intrinsics, config)
            write_json(self.out_dir / "calibration.json", result.to_dict())
            metric = [apply_calibration(d, result.s, result.o) for d in loader.depths]
            write_depth_sequence(self.out_dir / "depth_metric", metric)
        return self._finish("calibrate", {**result.to_dict(), "frames": len(frames)})

    # ------------------------------------------------------------------- slam

    def slam(self, scene_dir: PathLike, calib_dir: Optional[PathLike] = None) -> Dict[str, Any]:
        """Bundle-adjust poses and anchor depths, then lift and filter the cloud.

        Args:
            scene_dir: Scene directory
            calib_dir: Output directory of the calibrate stage; when omitted the
                raw depth serves as the prior

        Raises:
            NumericalError: If bundle adjustment does not converge
        """
        with self._stage("slam"):
            loader = SceneLoader(scene_dir)
            config = SolverConfig.from_dict(self.settings.section("slam"))
            calibrated = calib_dir is not None
            if calibrated:
                priors = read_depth_sequence(Path(calib_dir) / "depth_metric", loader.num_frames)
            else:
                if self.settings.get("calibration.enabled"):
                    logger.warning("No calibrated depth given; using the raw depth as the prior")
                priors = list(loader.depths)
            switches = {
                "mask_dynamic": config.mask_dynamic,
                "use_depth_prior": config.use_depth_prior,
                "calibrated_prior": calibrated,
            }
            problem = loader.ba_problem(
                priors,
                mask_dynamic=config.mask_dynamic,
                use_depth_prior=config.use_depth_prior,
                depth_weight=config.depth_weight,
            )
            self._notify_progress(f"Bundle adjustment over {loader.num_frames} frames", 0.2)
            solution = solve(problem, config)
            if not solution.converged:
                raise NumericalError(
                    "Bundle adjustment did not converge",
                    diagnostics={
                        **solution.diagnostics,
                        "cost_trace": list(solution.cost_trace),
                        "switches": switches,
                    },
                )

            cloud = lift_world_points(
                solution.poses,
                solution.inv_depths,
                loader.anchors,
                loader.intrinsics,
                loader.anchor_colors(),
                loader.anchor_human_flags(),
            )
            filtered = filter_epipolar(
                cloud, solution.poses, loader.intrinsics, loader.observations, config.epipolar_tau_px
            )
            dropped = len(cloud) - len(filtered)
            if dropped:
                logger.warning(f"Epipolar filter dropped {dropped} of {len(cloud)} points")

            write_trajectory(self.out_dir / "trajectory.txt", solution.poses)
            write_point_cloud(self.out_dir / "points.ply", filtered)
            report = {
                "converged": solution.converged,
                "iterations": solution.iterations,
                "cost_trace": list(solution.cost_trace),
                "final_cost": solution.cost_trace[-1],
                "damping": solution.damping,
                "switches": switches,
                "points": len(filtered),
                "dropped_points": dropped,
            }
            write_json(self.out_dir / "slam.json", report)
        return self._finish("slam", {k: v for k, v in report.items() if k != "cost_trace"})

    # ------------------------------------------------------------------ place

    def place(
        self, scene_dir: PathLike, slam_dir: PathLike, export_meshes: bool = False
    ) -> Dict[str, Any]:
        """Move camera-frame body tracks into the world and fill missing frames."""
        with self._stage("place"):
            loader = SceneLoader(scene_dir)
            _, poses = read_trajectory(Path(slam_dir) / "trajectory.txt")
            if len(poses) != loader.num_frames:
                raise InputError(
                    f"Trajectory has {len(poses)} poses, scene has {loader.num_frames} frames",
                    file_path=str(Path(slam_dir) / "trajectory.txt"),
                )
            world: List[BodyTrack] = []
            filled = 0
            for track in loader.camera_tracks:
                moved = track_to_world(track, poses, self.template)
                filled += int((~moved.observed()).sum())
                world.append(interpolate_track(moved))
            write_tracks(self.out_dir / "body_tracks_world.jsonl", world)
            meshes = self._export_meshes(world) if export_meshes else 0
        return self._finish(
            "place", {"tracks": len(world), "filled_frames": filled, "meshes": meshes}
        )

    def _export_meshes(self, tracks: List[BodyTrack]) -> int:
        count = 0
        for track in tracks:
            for t, params in enumerate(track.params()):
                path = self.out_dir / "meshes" / f"track_{track.track_id:02d}_{t:04d}.ply"
                write_mesh(path, pose_mesh(self.template, params, "world"), self.template.faces)
                count += 1
        logger.info(f"Exported {count} meshes to {self.out_dir / 'meshes'}")
        return count

    # ---------------------------------------------------------------- denoise

    def denoise(
        self,
        tracks_path: PathLike,
        points_path: PathLike,
        weights_path: Optional[PathLike] = None,
    ) -> Dict[str, Any]:
        """Refine world-frame tracks with the scene-aware denoiser."""
        with self._stage("denoise"):
            config = DenoiserConfig.from_dict(self.settings.section("denoiser"))
            weights_path = weights_path or config.weights_path
            tracks = read_tracks(tracks_path)
            for track in tracks:
                if track.frame_tag != "world":
                    raise InputError(
                        f"Track {track.track_id} is not world-frame", file_path=str(tracks_path)
                    )
            cloud = read_point_cloud(points_path)
            if weights_path:
                model, _ = load_model(weights_path, config)
            else:
                logger.warning("No denoiser weights given; the untrained network returns its input")
                model = build_model(config)
            refined = denoise(model, [interpolate_track(t) for t in tracks], cloud)
            write_tracks(self.out_dir / "body_tracks_denoised.jsonl", refined)
        return self._finish(
            "denoise",
            {
                "tracks": len(refined),
                "points": len(cloud),
                "weights": str(weights_path) if weights_path else None,
            },
        )

    # ------------------------------------------------------------------ train

    def train(self, scene_dir: Optional[PathLike] = None, num_sequences: int = 8) -> Dict[str, Any]:
        """Train the denoiser on synthetic walks and write weights.bin."""
        with self._stage("train"):
            config = DenoiserConfig.from_dict(self.settings.section("denoiser"))
            model = build_model(config)
            discriminator = (
                MotionDiscriminator(config.joints) if config.loss_weights["adversarial"] > 0 else None
            )
            cloud = (
                SceneLoader(scene_dir).scene_cloud(seed=self.settings.seed, template=self.template)
                if scene_dir is not None
                else None
            )
            sequences = synthetic_sequences(num_sequences, config.max_window, config.seed)
            trainer = DenoiserTrainer(model, config, TorchBodyModel(self.template), discriminator)
            history = trainer.fit(sequences, cloud)
            save_model(self.out_dir / "weights.bin", model, discriminator)
        return self._finish(
            "train",
            {
                "steps": len(history),
                "final_loss": history[-1]["total"] if history else None,
                "weights": str(self.out_dir / "weights.bin"),
            },
        )

    # ------------------------------------------------------------------- eval

    def evaluate(
        self,
        pred_traj: PathLike,
        gt_traj: PathLike,
        pred_tracks: Optional[PathLike] = None,
        gt_tracks: Optional[PathLike] = None,
        pred_depth_dir: Optional[PathLike] = None,
        gt_depth_dir: Optional[PathLike] = None,
        align: bool = True,
    ) -> Dict[str, Any]:
        """Compare predictions against ground truth and write metrics.json."""
        with self._stage("eval"):
            section = self.settings.section("metrics")
            if not align:
                section["ate_align"] = "none"
            config = MetricsConfig.from_dict(section)
            pred_poses = read_trajectory(pred_traj)[1]
            gt_poses = read_trajectory(gt_traj)[1]
            tracks_pair = None
            if pred_tracks is not None and gt_tracks is not None:
                tracks_pair = (
                    read_tracks(pred_tracks, len(gt_poses)),
                    read_tracks(gt_tracks, len(gt_poses)),
                )
            depths_pair = None
            if pred_depth_dir is not None and gt_depth_dir is not None:
                depths_pair = (read_depth_sequence(pred_depth_dir), read_depth_sequence(gt_depth_dir))
            report = build_report(
                pred_poses,
                gt_poses,
                *(tracks_pair or (None, None)),
                *(depths_pair or (None, None)),
                config=config,
                template=self.template,
            ).to_dict()
            write_json(self.out_dir / "metrics.json", report)
        return self._finish("eval", {"metrics": report})

    # --------------------------------------------------------------- pipeline

    def run_all(self, scene_dir: PathLike) -> Dict[str, Any]:
        """calibrate → slam → place → (denoise) → eval against the scene's gt/."""
        scene_dir = Path(scene_dir)
        summaries: Dict[str, Any] = {}
        calibrated = bool(self.settings.get("calibration.enabled"))
        if calibrated:
            summaries["calibrate"] = self.calibrate(scene_dir)
        summaries["slam"] = self.slam(scene_dir, self.out_dir if calibrated else None)
        summaries["place"] = self.place(scene_dir, self.out_dir)
        tracks = self.out_dir / "body_tracks_world.jsonl"
        if self.settings.get("denoiser.enabled"):
            summaries["denoise"] = self.denoise(tracks, self.out_dir / "points.ply")
            tracks = self.out_dir / "body_tracks_denoised.jsonl"

        loader = SceneLoader(scene_dir)
        if loader.has_ground_truth():
            summaries["eval"] = self.evaluate(
                self.out_dir / "trajectory.txt",
                loader.gt_dir / "trajectory.txt",
                tracks,
                loader.gt_dir / "body_tracks_world.jsonl",
                self.out_dir / "depth_metric" if calibrated else None,
                loader.gt_dir if calibrated else None,
            )
        else:
            logger.warning(f"Scene {scene_dir} has no gt/ directory; skipping evaluation")
        return {"stage": "pipeline", "stages": summaries}

