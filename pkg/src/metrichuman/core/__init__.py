"""Core geometry, optimization and file handling.

The stage orchestrator is imported from `metrichuman.core.pipeline` directly.
"""

from .ba_core import BAProblem, BASolution, FramePairObservation, SolverConfig, solve
from .body_model import BodyMesh, BodyParams, BodyTemplate, default_template, pose_mesh
from .depth_calibration import CalibrationConfig, CalibrationFrame, CalibrationResult, calibrate
from .error_handler import (
    ConfigurationError,
    DomainError,
    ErrorCategory,
    ErrorHandler,
    ErrorSeverity,
    FormatError,
    InputError,
    MetricHumanError,
    NoSupportError,
    NumericalError,
)
from .geometry import Intrinsics, PointCloud, SE3Pose, UnitQuaternion
from .loader import SceneLoader
from .metrics import MetricsConfig, MetricsReport
from .synth import SynthConfig, SynthScenario, generate
from .world_frame import BodyTrack, camera_to_world, interpolate_track, world_to_camera

__all__ = [
    "BAProblem",
    "BASolution",
    "BodyMesh",
    "BodyParams",
    "BodyTemplate",
    "BodyTrack",
    "CalibrationConfig",
    "CalibrationFrame",
    "CalibrationResult",
    "ConfigurationError",
    "DomainError",
    "ErrorCategory",
    "ErrorHandler",
    "ErrorSeverity",
    "FormatError",
    "FramePairObservation",
    "InputError",
    "Intrinsics",
    "MetricHumanError",
    "MetricsConfig",
    "MetricsReport",
    "NoSupportError",
    "NumericalError",
    "PointCloud",
    "SE3Pose",
    "SceneLoader",
    "SolverConfig",
    "SynthConfig",
    "SynthScenario",
    "UnitQuaternion",
    "calibrate",
    "camera_to_world",
    "default_template",
    "generate",
    "interpolate_track",
    "pose_mesh",
    "solve",
    "world_to_camera",
]
