"""Command-line entry point for metrichuman."""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from .config import PipelineSettings
from .core.error_handler import ErrorHandler, NumericalError
from .core.formats import dumps_canonical, write_json
from .core.pipeline import HumanSlamPipeline

logger = logging.getLogger(__name__)


def setup_logging(level: str = "INFO", log_file: Optional[str] = None) -> None:
    """Set up application logging.

    Logs go to stderr; stdout is reserved for the JSON summary.

    Args:
        level: Logging level
        log_file: Optional file that receives the same records
    """
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(
        level=getattr(logging, level.upper()),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=handlers,
        force=True,
    )


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the configured seed")
    common.add_argument("--config", type=Path, default=None, help="JSON configuration file")
    common.add_argument("--out-dir", type=Path, default=Path("."), help="output directory")
    common.add_argument(
        "--log-level",
        default=None,
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        help="override app.log_level",
    )

    parser = argparse.ArgumentParser(
        prog="metrichuman",
        description="Metric-scale camera and human trajectories from a depth-augmented video.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("synth", parents=[common], help="write a synthetic scene directory")

    p = sub.add_parser("calibrate", parents=[common], help="recover depth scale and offset")
    p.add_argument("--in-dir", type=Path, required=True)

    p = sub.add_parser("slam", parents=[common], help="bundle-adjust poses and depths")
    p.add_argument("--in-dir", type=Path, required=True)
    p.add_argument("--calib-dir", type=Path, default=None)

    p = sub.add_parser("place", parents=[common], help="move body tracks into the world frame")
    p.add_argument("--in-dir", type=Path, required=True)
    p.add_argument("--slam-dir", type=Path, required=True)
    p.add_argument("--export-meshes", action="store_true")

    p = sub.add_parser("denoise", parents=[common], help="refine world tracks against the scene")
    p.add_argument("--tracks", type=Path, required=True)
    p.add_argument("--points", type=Path, required=True)
    p.add_argument("--weights", type=Path, default=None)

    p = sub.add_parser("train", parents=[common], help="train the denoiser")
    p.add_argument("--in-dir", type=Path, default=None)

    p = sub.add_parser("eval", parents=[common], help="compute metrics against ground truth")
    p.add_argument("--pred-traj", type=Path, required=True)
    p.add_argument("--gt-traj", type=Path, required=True)
    p.add_argument("--pred-tracks", type=Path, default=None)
    p.add_argument("--gt-tracks", type=Path, default=None)
    p.add_argument("--pred-depth-dir", type=Path, default=None)
    p.add_argument("--gt-depth-dir", type=Path, default=None)
    p.add_argument("--no-align", action="store_true")

    p = sub.add_parser("pipeline", parents=[common], help="calibrate, slam, place, denoise and eval")
    p.add_argument("--in-dir", type=Path, required=True)
    return parser


def run_command(args: argparse.Namespace, pipeline: HumanSlamPipeline) -> Dict[str, Any]:
    """Dispatch one parsed subcommand to the pipeline."""
    if args.command == "synth":
        return pipeline.synth()
    if args.command == "calibrate":
        return pipeline.calibrate(args.in_dir)
    if args.command == "slam":
        return pipeline.slam(args.in_dir, args.calib_dir)
    if args.command == "place":
        return pipeline.place(args.in_dir, args.slam_dir, args.export_meshes)
    if args.command == "denoise":
        return pipeline.denoise(args.tracks, args.points, args.weights)
    if args.command == "train":
        return pipeline.train(args.in_dir)
    if args.command == "eval":
        return pipeline.evaluate(
            args.pred_traj,
            args.gt_traj,
            args.pred_tracks,
            args.gt_tracks,
            args.pred_depth_dir,
            args.gt_depth_dir,
            align=not args.no_align,
        )
    return pipeline.run_all(args.in_dir)


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point; returns the process exit code."""
    args = build_parser().parse_args(argv)
    handler = ErrorHandler()
    out_dir: Path = args.out_dir

    try:
        settings = PipelineSettings(args.config)
        if args.seed is not None:
            settings.set("seed", args.seed)
        setup_logging(args.log_level or settings.get("app.log_level", "INFO"), settings.get("app.log_file"))
        logger.info(f"Running metrichuman {args.command}")

        out_dir.mkdir(parents=True, exist_ok=True)
        summary = run_command(args, HumanSlamPipeline(settings, out_dir))
    except Exception as e:
        error = handler.handle_exception(e, context=args.command)
        if isinstance(error, NumericalError):
            path = write_json(
                out_dir / "diagnostics.json",
                {"message": str(error), "stage": args.command, **error.diagnostics},
            )
            logger.error(f"Diagnostics written to {path}")
        sys.stdout.write(
            dumps_canonical(
                {
                    "status": "error",
                    "category": error.category.value,
                    "message": str(error),
                    "user_message": error.user_message,
                    "details": error.details,
                }
            )
        )
        return handler.exit_code(error)

    sys.stdout.write(dumps_canonical({"status": "ok", **summary}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
