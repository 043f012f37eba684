"""Readers and writers for every on-disk artifact of a scene directory.

All JSON goes through `write_json`, which sorts keys, indents by 2 and ends with
a newline; floats keep their `repr` so a file read and written again is unchanged.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from PIL import Image

from .ba_core import FramePairObservation
from .body_model import BodyMesh, BodyParams, BodyTemplate
from .error_handler import FormatError, InputError
from .geometry import (
    Intrinsics,
    PointCloud,
    SE3Pose,
    UnitQuaternion,
    matrix_to_quat,
    quat_to_matrix,
)
from .world_frame import FRAME_TAGS, BodyTrack

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

TUM_HEADER = "# timestamp tx ty tz qx qy qz qw"
DEPTH_UNITS = "m"


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------


def _to_builtin(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def dumps_canonical(data: Any) -> str:
    """Canonical JSON text: sorted keys, 2-space indent, trailing newline."""
    return json.dumps(data, sort_keys=True, indent=2, default=_to_builtin) + "\n"


def write_json(path: PathLike, data: Any) -> Path:
    """Write canonical JSON, creating parent directories.

    Args:
        path: Output file
        data: JSON-compatible data (numpy scalars and arrays allowed)

    Returns:
        The written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_canonical(data))
    logger.debug(f"Wrote {path}")
    return path


def read_json(path: PathLike) -> Any:
    """Read a JSON file.

    Raises:
        InputError: If the file does not exist
        FormatError: If the content is not valid JSON
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"Missing file: {path}", file_path=str(path))
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as e:
        logger.error(f"Failed to parse {path}: {e}")
        raise FormatError(f"Cannot parse JSON in {path}: {e}", file_path=str(path))


def write_jsonl(path: PathLike, records: Iterable[Dict[str, Any]]) -> Path:
    """Write one compact, key-sorted JSON object per line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [json.dumps(r, sort_keys=True, default=_to_builtin) for r in records]
    path.write_text("".join(line + "\n" for line in lines))
    logger.debug(f"Wrote {len(lines)} records to {path}")
    return path


def read_jsonl(path: PathLike) -> List[Dict[str, Any]]:
    """Read JSON lines, skipping blank lines.

    Raises:
        InputError: If the file does not exist
        FormatError: If a line is not a JSON object (the message names the line)
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"Missing file: {path}", file_path=str(path))
    records = []
    for number, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise FormatError(f"Cannot parse {path} line {number}: {e}", file_path=str(path))
        if not isinstance(record, dict):
            raise FormatError(f"{path} line {number} is not a JSON object", file_path=str(path))
        records.append(record)
    return records


# ---------------------------------------------------------------------------
# Trajectories (TUM)
# ---------------------------------------------------------------------------


def write_trajectory(
    path: PathLike, poses: Sequence[SE3Pose], timestamps: Optional[Sequence[float]] = None
) -> Path:
    """Write camera-to-world poses as `t tx ty tz qx qy qz qw` lines.

    Args:
        path: Output file
        poses: One pose per frame
        timestamps: Seconds per pose (defaults to the frame index)

    Returns:
        The written path
    """
    if timestamps is None:
        timestamps = [float(t) for t in range(len(poses))]
    if len(timestamps) != len(poses):
        raise FormatError(f"{len(poses)} poses but {len(timestamps)} timestamps", file_path=str(path))
    lines = [TUM_HEADER]
    for stamp, pose in zip(timestamps, poses):
        w, x, y, z = pose.quaternion().as_array()
        values = [float(stamp), *map(float, pose.translation), float(x), float(y), float(z), float(w)]
        lines.append(" ".join(repr(v) for v in values))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    logger.debug(f"Wrote {len(poses)} poses to {path}")
    return path


def read_trajectory(path: PathLike) -> Tuple[List[float], List[SE3Pose]]:
    """Read a TUM trajectory.

    Returns:
        Tuple of (timestamps, poses)

    Raises:
        InputError: If the file does not exist
        FormatError: If a line does not hold 8 numbers or a quaternion is zero
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"Missing trajectory: {path}", file_path=str(path))
    stamps: List[float] = []
    poses: List[SE3Pose] = []
    for number, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            values = [float(v) for v in line.split()]
        except ValueError as e:
            raise FormatError(f"Cannot parse {path} line {number}: {e}", file_path=str(path))
        if len(values) != 8:
            raise FormatError(
                f"{path} line {number} has {len(values)} values, expected 8", file_path=str(path)
            )
        t, tx, ty, tz, qx, qy, qz, qw = values
        try:
            quaternion = UnitQuaternion.from_array([qw, qx, qy, qz])
        except ValueError as e:
            raise FormatError(f"{path} line {number}: {e}", file_path=str(path))
        stamps.append(t)
        poses.append(SE3Pose.from_quaternion(quaternion, [tx, ty, tz]))
    if not poses:
        raise FormatError(f"Trajectory {path} holds no poses", file_path=str(path))
    return stamps, poses


# ---------------------------------------------------------------------------
# Depth maps, masks and color frames
# ---------------------------------------------------------------------------


def depth_sidecar(path: PathLike) -> Path:
    return Path(path).with_suffix(".json")


def write_depth(path: PathLike, depth: np.ndarray) -> Path:
    """Write raw little-endian float32 depth (row-major) plus its JSON sidecar.

    NaN marks invalid pixels and is stored as is.
    """
    depth = np.asarray(depth)
    if depth.ndim != 2:
        raise FormatError(f"Depth map must be 2-D, got shape {depth.shape}", file_path=str(path))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(np.ascontiguousarray(depth, dtype="<f4").tobytes())
    write_json(
        depth_sidecar(path),
        {"width": int(depth.shape[1]), "height": int(depth.shape[0]), "units": DEPTH_UNITS},
    )
    return path


def read_depth(path: PathLike, frame: Optional[int] = None) -> np.ndarray:
    """Read a float32 depth map as float64.

    Args:
        path: The .f32 file; its sidecar sits next to it
        frame: Frame index for error messages

    Returns:
        H×W depth with NaN for invalid pixels

    Raises:
        InputError: If the data file or its sidecar is missing
        FormatError: If the byte count disagrees with the sidecar
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"Missing depth map: {path}", file_path=str(path), frame=frame)
    meta = read_json(depth_sidecar(path))
    try:
        width, height = int(meta["width"]), int(meta["height"])
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"Bad depth sidecar {depth_sidecar(path)}: {e}", file_path=str(path))
    if meta.get("units", DEPTH_UNITS) != DEPTH_UNITS:
        raise FormatError(f"Unsupported depth units {meta.get('units')!r}", file_path=str(path))
    blob = path.read_bytes()
    if len(blob) != 4 * width * height:
        raise FormatError(
            f"Depth map {path} has {len(blob)} bytes, expected {4 * width * height} "
            f"for {width}x{height}",
            file_path=str(path),
        )
    return np.frombuffer(blob, dtype="<f4").reshape(height, width).astype(np.float64)


def write_mask(path: PathLike, mask: np.ndarray) -> Path:
    """Write an instance mask as 8-bit binary PGM (P5)."""
    mask = np.asarray(mask)
    if mask.ndim != 2 or mask.min(initial=0) < 0 or mask.max(initial=0) > 255:
        raise FormatError("Instance mask must be 2-D with ids in [0, 255]", file_path=str(path))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(mask.astype(np.uint8)).save(path, format="PPM")
    return path


def read_mask(path: PathLike, frame: Optional[int] = None) -> np.ndarray:
    """Read a P5 instance mask as uint8.

    Raises:
        InputError: If the file is missing
        FormatError: If it is not an 8-bit grayscale image
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"Missing mask: {path}", file_path=str(path), frame=frame)
    try:
        with Image.open(path) as image:
            if image.mode != "L":
                raise FormatError(
                    f"Mask {path} has mode {image.mode}, expected 8-bit grayscale",
                    file_path=str(path),
                )
            return np.array(image, dtype=np.uint8)
    except OSError as e:
        logger.error(f"Failed to read mask {path}: {e}")
        raise FormatError(f"Cannot read mask {path}: {e}", file_path=str(path))


def write_rgb(path: PathLike, rgb: np.ndarray) -> Path:
    """Write an 8-bit RGB frame as PNG."""
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise FormatError(f"RGB frame must be H×W×3, got {rgb.shape}", file_path=str(path))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(rgb.astype(np.uint8)).save(path, format="PNG")
    return path


def read_rgb(path: PathLike, frame: Optional[int] = None) -> np.ndarray:
    """Read a color frame as H×W×3 uint8.

    Raises:
        InputError: If the file is missing
        FormatError: If Pillow cannot decode it
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"Missing color frame: {path}", file_path=str(path), frame=frame)
    try:
        with Image.open(path) as image:
            return np.array(image.convert("RGB"), dtype=np.uint8)
    except OSError as e:
        logger.error(f"Failed to read color frame {path}: {e}")
        raise FormatError(f"Cannot read color frame {path}: {e}", file_path=str(path))


# ---------------------------------------------------------------------------
# Body tracks
# ---------------------------------------------------------------------------


def _quat_list(rotation: np.ndarray) -> List[float]:
    return [float(v) for v in matrix_to_quat(rotation)]


def params_to_record(params: BodyParams, frame: int, track: int, frame_tag: str) -> Dict[str, Any]:
    return {
        "frame": int(frame),
        "track": int(track),
        "frame_tag": frame_tag,
        "phi": _quat_list(params.phi),
        "theta": [_quat_list(r) for r in params.theta],
        "beta": [float(v) for v in params.beta],
        "gamma": [float(v) for v in params.gamma],
    }


def record_to_params(record: Dict[str, Any]) -> BodyParams:
    """Rebuild body parameters from a track record (quaternions are normalized)."""
    phi = quat_to_matrix(np.asarray(record["phi"], dtype=np.float64))
    theta = quat_to_matrix(np.asarray(record["theta"], dtype=np.float64))
    return BodyParams(phi=phi, theta=theta, beta=record["beta"], gamma=record["gamma"])


def write_tracks(path: PathLike, tracks: Sequence[BodyTrack]) -> Path:
    """One record per observed (frame, track), ordered by track then frame."""
    records = []
    for track in sorted(tracks, key=lambda tr: tr.track_id):
        for frame, slot in enumerate(track.slots):
            if slot is not None:
                records.append(params_to_record(slot, frame, track.track_id, track.frame_tag))
    path = write_jsonl(path, records)
    logger.info(f"Wrote {len(tracks)} tracks ({len(records)} frames) to {path}")
    return path


def read_tracks(path: PathLike, num_frames: Optional[int] = None) -> List[BodyTrack]:
    """Read body tracks; frames without a record become missing slots.

    Args:
        path: JSON lines file
        num_frames: Sequence length (defaults to one past the last frame seen)

    Returns:
        Tracks sorted by id

    Raises:
        FormatError: If a record is malformed, mixes frame tags or repeats a frame
    """
    path = Path(path)
    by_track: Dict[int, Dict[int, BodyParams]] = {}
    tags: Dict[int, str] = {}
    for number, record in enumerate(read_jsonl(path), start=1):
        try:
            frame, track, tag = int(record["frame"]), int(record["track"]), str(record["frame_tag"])
            params = record_to_params(record)
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"Bad track record at {path} line {number}: {e}", file_path=str(path))
        if tag not in FRAME_TAGS:
            raise FormatError(f"Unknown frame_tag {tag!r} at {path} line {number}", file_path=str(path))
        if tags.setdefault(track, tag) != tag:
            raise FormatError(f"Track {track} mixes frame tags in {path}", file_path=str(path))
        frames = by_track.setdefault(track, {})
        if frame in frames or frame < 0:
            raise FormatError(f"Track {track} has a bad or repeated frame {frame}", file_path=str(path))
        frames[frame] = params

    if not by_track:
        return []
    last = max(max(frames) for frames in by_track.values())
    length = last + 1 if num_frames is None else int(num_frames)
    if length <= last:
        raise FormatError(f"{path} has frame {last} beyond {length} frames", file_path=str(path))
    return [
        BodyTrack(track, tuple(frames.get(t) for t in range(length)), tags[track])
        for track, frames in sorted(by_track.items())
    ]


# ---------------------------------------------------------------------------
# Correspondences and anchors
# ---------------------------------------------------------------------------


def write_correspondences(path: PathLike, observations: Sequence[FramePairObservation]) -> Path:
    return write_jsonl(
        path,
        (
            {
                "i": obs.i,
                "j": obs.j,
                "pixels": obs.pixels,
                "targets": obs.targets,
                "confidence": obs.confidence,
            }
            for obs in observations
        ),
    )


def read_correspondences(path: PathLike) -> List[FramePairObservation]:
    """Read frame-pair correspondences.

    Raises:
        FormatError: If a record is malformed
    """
    observations = []
    for number, record in enumerate(read_jsonl(path), start=1):
        try:
            observations.append(
                FramePairObservation(
                    i=int(record["i"]),
                    j=int(record["j"]),
                    pixels=np.asarray(record["pixels"], dtype=np.float64),
                    targets=np.asarray(record["targets"], dtype=np.float64),
                    confidence=np.asarray(record["confidence"], dtype=np.float64),
                )
            )
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"Bad correspondence at {path} line {number}: {e}", file_path=str(path))
    return observations


def write_anchors(path: PathLike, anchors: Sequence[np.ndarray]) -> Path:
    return write_jsonl(path, ({"frame": t, "pixels": pix} for t, pix in enumerate(anchors)))


def read_anchors(path: PathLike) -> List[np.ndarray]:
    """Anchor pixels per frame, in frame order.

    Raises:
        FormatError: If frames are missing, repeated or out of order
    """
    records = read_jsonl(path)
    anchors = []
    for expected, record in enumerate(records):
        try:
            frame = int(record["frame"])
            pixels = np.asarray(record["pixels"], dtype=np.float64).reshape(-1, 2)
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"Bad anchor record for frame {expected} in {path}: {e}", file_path=str(path))
        if frame != expected:
            raise FormatError(f"{path}: expected anchors of frame {expected}, got {frame}", file_path=str(path))
        anchors.append(pixels)
    return anchors


# ---------------------------------------------------------------------------
# Point clouds and meshes (ASCII PLY)
# ---------------------------------------------------------------------------


def write_point_cloud(path: PathLike, cloud: PointCloud) -> Path:
    """ASCII PLY with x y z, 8-bit red green blue, and a float `human` flag."""
    header = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(cloud)}",
        "property double x",
        "property double y",
        "property double z",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
        "property float human",
        "end_header",
    ]
    colors = np.clip(np.rint(cloud.rgb * 255.0), 0, 255).astype(np.int64)
    rows = [
        " ".join([repr(float(x)), repr(float(y)), repr(float(z)), str(r), str(g), str(b), repr(float(h))])
        for (x, y, z), (r, g, b), h in zip(cloud.xyz, colors, cloud.human)
    ]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(header + rows) + "\n")
    logger.debug(f"Wrote {len(cloud)} points to {path}")
    return path


def _read_ply_header(lines: List[str], path: Path) -> Tuple[Dict[str, int], List[str], int]:
    if not lines or lines[0].strip() != "ply":
        raise FormatError(f"{path} is not a PLY file", file_path=str(path))
    counts: Dict[str, int] = {}
    vertex_props: List[str] = []
    element = None
    for index, line in enumerate(lines[1:], start=1):
        parts = line.split()
        if not parts or parts[0] == "comment":
            continue
        if parts[0] == "format" and parts[1] != "ascii":
            raise FormatError(f"{path}: only ASCII PLY is supported", file_path=str(path))
        if parts[0] == "element":
            element = parts[1]
            counts[element] = int(parts[2])
        elif parts[0] == "property" and element == "vertex":
            vertex_props.append(parts[-1])
        elif parts[0] == "end_header":
            return counts, vertex_props, index + 1
    raise FormatError(f"{path}: PLY header has no end_header", file_path=str(path))


def read_point_cloud(path: PathLike) -> PointCloud:
    """Read a point cloud written by `write_point_cloud`.

    Raises:
        InputError: If the file is missing
        FormatError: If the header lacks a 7-channel vertex element
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"Missing point cloud: {path}", file_path=str(path))
    lines = path.read_text().splitlines()
    counts, props, start = _read_ply_header(lines, path)
    expected = ["x", "y", "z", "red", "green", "blue", "human"]
    if props != expected:
        raise FormatError(f"{path}: vertex properties {props}, expected {expected}", file_path=str(path))
    count = counts.get("vertex", 0)
    if count == 0:
        return PointCloud.empty()
    try:
        data = np.array([[float(v) for v in line.split()] for line in lines[start : start + count]])
    except ValueError as e:
        raise FormatError(f"Cannot parse vertices of {path}: {e}", file_path=str(path))
    if data.shape != (count, 7):
        raise FormatError(f"{path}: expected {count} rows of 7 values", file_path=str(path))
    return PointCloud(data[:, :3], data[:, 3:6] / 255.0, data[:, 6])


def write_mesh(path: PathLike, mesh: BodyMesh, faces: np.ndarray) -> Path:
    """ASCII PLY with vertex positions and triangle faces."""
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    header = [
        "ply",
        "format ascii 1.0",
        f"comment frame {mesh.frame_tag}",
        f"element vertex {len(mesh.vertices)}",
        "property double x",
        "property double y",
        "property double z",
        f"element face {len(faces)}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    rows = [" ".join(repr(float(v)) for v in vertex) for vertex in mesh.vertices]
    rows += [f"3 {a} {b} {c}" for a, b, c in faces]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(header + rows) + "\n")
    return path


def read_mesh(path: PathLike) -> Tuple[BodyMesh, np.ndarray]:
    """Read a mesh written by `write_mesh`.

    Returns:
        Tuple of (mesh, F×3 faces)
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"Missing mesh: {path}", file_path=str(path))
    lines = path.read_text().splitlines()
    counts, _, start = _read_ply_header(lines, path)
    frame_tag = "camera"
    for line in lines[:start]:
        if line.startswith("comment frame "):
            frame_tag = line.split()[-1]
    num_vertices, num_faces = counts.get("vertex", 0), counts.get("face", 0)
    try:
        vertices = np.array(
            [[float(v) for v in line.split()] for line in lines[start : start + num_vertices]]
        ).reshape(-1, 3)
        faces = np.array(
            [[int(v) for v in line.split()[1:4]] for line in lines[start + num_vertices : start + num_vertices + num_faces]],
            dtype=np.int64,
        ).reshape(-1, 3)
    except ValueError as e:
        raise FormatError(f"Cannot parse mesh {path}: {e}", file_path=str(path))
    return BodyMesh(vertices, frame_tag), faces


# ---------------------------------------------------------------------------
# Intrinsics and body template
# ---------------------------------------------------------------------------


def write_intrinsics(path: PathLike, intr: Intrinsics) -> Path:
    return write_json(path, intr.to_dict())


def read_intrinsics(path: PathLike) -> Intrinsics:
    """Read intrinsics.json.

    Raises:
        FormatError: If a field is missing or the values are invalid
    """
    data = read_json(path)
    try:
        return Intrinsics.from_dict(data)
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"Bad intrinsics in {path}: {e}", file_path=str(path))


def write_template(path: PathLike, template: BodyTemplate) -> Path:
    return write_json(path, template.to_dict())


def read_template(path: PathLike) -> BodyTemplate:
    return BodyTemplate.from_dict(read_json(path))


# ---------------------------------------------------------------------------
# Scene directories
# ---------------------------------------------------------------------------


def frame_path(directory: PathLike, prefix: str, frame: int, suffix: str) -> Path:
    return Path(directory) / f"{prefix}_{frame:04d}{suffix}"


def write_depth_sequence(directory: PathLike, depths: Iterable[np.ndarray]) -> List[Path]:
    return [write_depth(frame_path(directory, "depth", t, ".f32"), d) for t, d in enumerate(depths)]


def read_depth_sequence(directory: PathLike, num_frames: Optional[int] = None) -> List[np.ndarray]:
    """Read depth_%04d.f32 files in frame order.

    Args:
        directory: Directory holding the maps
        num_frames: Expected count (defaults to every consecutive file from 0)

    Raises:
        InputError: If the directory holds no depth maps or one is missing
    """
    directory = Path(directory)
    if num_frames is None:
        num_frames = 0
        while frame_path(directory, "depth", num_frames, ".f32").is_file():
            num_frames += 1
        if num_frames == 0:
            raise InputError(f"No depth maps in {directory}", file_path=str(directory))
    return [read_depth(frame_path(directory, "depth", t, ".f32"), frame=t) for t in range(num_frames)]


def write_scene(directory: PathLike, scenario: Any) -> Path:
    """Write a synthetic scenario as a scene directory with its ground truth.

    Args:
        directory: Output directory (created)
        scenario: A `SynthScenario`

    Returns:
        The scene directory
    """
    directory = Path(directory)
    frames = directory / "frames"
    gt = directory / "gt"
    write_intrinsics(directory / "intrinsics.json", scenario.intr)
    for t in range(scenario.num_frames):
        write_rgb(frame_path(frames, "rgb", t, ".png"), scenario.rgb[t])
        write_depth(frame_path(frames, "depth", t, ".f32"), scenario.depth[t])
        write_mask(frame_path(frames, "mask", t, ".pgm"), scenario.masks[t])
    write_correspondences(directory / "correspondences.jsonl", scenario.observations)
    write_anchors(directory / "anchors.jsonl", scenario.anchors)
    write_tracks(directory / "body_tracks_camera.jsonl", scenario.camera_tracks)

    write_trajectory(gt / "trajectory.txt", scenario.gt_poses)
    write_tracks(gt / "body_tracks_world.jsonl", scenario.gt_tracks)
    write_depth_sequence(gt, scenario.depth_true)
    write_json(gt / "calibration.json", {"s": scenario.scale, "o": scenario.offset})
    logger.info(f"Wrote scene with {scenario.num_frames} frames to {directory}")
    return directory
