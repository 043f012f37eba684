"""Camera/world transport of body parameters and gap filling along tracks."""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .body_model import BodyParams, BodyTemplate, default_template, pelvis
from .error_handler import DomainError
from .geometry import SE3Pose, UnitQuaternion, quat_slerp

logger = logging.getLogger(__name__)

FRAME_TAGS = ("camera", "world")


@dataclass(frozen=True)
class BodyTrack:
    """One person across frames; a slot is None where the detection is missing."""

    track_id: int
    slots: Tuple[Optional[BodyParams], ...]
    frame_tag: str = "camera"

    def __post_init__(self) -> None:
        object.__setattr__(self, "slots", tuple(self.slots))
        if self.frame_tag not in FRAME_TAGS:
            raise DomainError(f"Unknown frame tag: {self.frame_tag}")
        if not any(slot is not None for slot in self.slots):
            raise DomainError(f"Track {self.track_id} has no observed frame")

    @property
    def num_frames(self) -> int:
        return len(self.slots)

    def observed(self) -> np.ndarray:
        """Boolean mask of observed frames."""
        return np.array([slot is not None for slot in self.slots], dtype=bool)

    def is_complete(self) -> bool:
        return bool(np.all(self.observed()))

    def params(self) -> List[BodyParams]:
        """Per-frame parameters of a fully observed track.

        Raises:
            DomainError: If any slot is missing
        """
        if not self.is_complete():
            raise DomainError(f"Track {self.track_id} has missing frames")
        return [slot for slot in self.slots if slot is not None]


def camera_to_world(
    params: BodyParams, pose: SE3Pose, template: Optional[BodyTemplate] = None
) -> BodyParams:
    """Φ^w = R Φ^c and Γ^w = R(Γ^c + c) + t − c with c the shaped pelvis.

    The pose is camera-to-world. θ and β are carried over untouched.
    """
    template = template or default_template()
    c = pelvis(template, params.beta)
    rotation, translation = pose.rotation, pose.translation
    return BodyParams(
        phi=rotation @ params.phi,
        theta=params.theta,
        beta=params.beta,
        gamma=rotation @ (params.gamma + c) + translation - c,
    )


def world_to_camera(
    params: BodyParams, pose: SE3Pose, template: Optional[BodyTemplate] = None
) -> BodyParams:
    """Inverse of camera_to_world for the same camera-to-world pose."""
    template = template or default_template()
    c = pelvis(template, params.beta)
    rotation, translation = pose.rotation, pose.translation
    return BodyParams(
        phi=rotation.T @ params.phi,
        theta=params.theta,
        beta=params.beta,
        gamma=rotation.T @ (params.gamma + c - translation) - c,
    )


def track_to_world(
    track: BodyTrack, poses: Sequence[SE3Pose], template: Optional[BodyTemplate] = None
) -> BodyTrack:
    """Transport every observed slot of a camera-frame track with its frame's pose."""
    if track.frame_tag != "camera":
        raise DomainError(f"Track {track.track_id} is already in the {track.frame_tag} frame")
    if len(poses) != track.num_frames:
        raise DomainError(
            f"Track {track.track_id} spans {track.num_frames} frames, got {len(poses)} poses"
        )
    template = template or default_template()
    slots = tuple(
        None if slot is None else camera_to_world(slot, pose, template)
        for slot, pose in zip(track.slots, poses)
    )
    return BodyTrack(track.track_id, slots, "world")


def _slerp_rotation(a: np.ndarray, b: np.ndarray, t: float) -> np.ndarray:
    qa = UnitQuaternion.from_matrix(a)
    qb = UnitQuaternion.from_matrix(b)
    return quat_slerp(qa, qb, t).to_matrix()


def interpolate_params(a: BodyParams, b: BodyParams, t: float) -> BodyParams:
    """Blend two parameter sets: slerp per rotation, linear β and Γ."""
    theta = np.stack([_slerp_rotation(ra, rb, t) for ra, rb in zip(a.theta, b.theta)])
    return BodyParams(
        phi=_slerp_rotation(a.phi, b.phi, t),
        theta=theta,
        beta=(1.0 - t) * a.beta + t * b.beta,
        gamma=(1.0 - t) * a.gamma + t * b.gamma,
    )


def interpolate_track(track: BodyTrack) -> BodyTrack:
    """Fill missing slots.

    Interior gaps interpolate between the nearest observed neighbors; leading and
    trailing gaps repeat the nearest observation.
    """
    observed = np.nonzero(track.observed())[0]
    if len(observed) == track.num_frames:
        return track

    slots: List[Optional[BodyParams]] = list(track.slots)
    filled = 0
    for frame in range(track.num_frames):
        if slots[frame] is not None:
            continue
        after = observed[np.searchsorted(observed, frame)] if frame < observed[-1] else None
        before = observed[np.searchsorted(observed, frame) - 1] if frame > observed[0] else None
        if before is None:
            slots[frame] = track.slots[after]
        elif after is None:
            slots[frame] = track.slots[before]
        else:
            t = (frame - before) / (after - before)
            start, end = track.slots[before], track.slots[after]
            assert start is not None and end is not None
            slots[frame] = interpolate_params(start, end, float(t))
        filled += 1

    logger.debug(f"Track {track.track_id}: filled {filled} missing frames")
    return BodyTrack(track.track_id, tuple(slots), track.frame_tag)
