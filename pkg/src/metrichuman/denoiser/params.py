"""Flat per-frame parameter vectors [q(Φ), q(θ_1..θ_J), β, Γ] for the denoiser."""

from typing import List, Tuple

import numpy as np

from ..core.body_model import NUM_BETAS, NUM_JOINTS, BodyParams
from ..core.error_handler import DomainError
from ..core.geometry import matrix_to_quat, quat_to_matrix
from ..core.world_frame import BodyTrack


def param_dim(num_joints: int = NUM_JOINTS) -> int:
    """F = 4 + 4J + 10 + 3."""
    return 4 + 4 * num_joints + NUM_BETAS + 3


def param_slices(num_joints: int = NUM_JOINTS) -> Tuple[slice, slice, slice, slice]:
    """Slices of Φ, θ, β and Γ within a flat vector."""
    theta_end = 4 + 4 * num_joints
    beta_end = theta_end + NUM_BETAS
    return slice(0, 4), slice(4, theta_end), slice(theta_end, beta_end), slice(beta_end, beta_end + 3)


def flatten_body(params: BodyParams) -> np.ndarray:
    """One frame as an F-vector; quaternions have w >= 0."""
    return np.concatenate(
        [
            matrix_to_quat(params.phi),
            matrix_to_quat(params.theta).reshape(-1),
            params.beta,
            params.gamma,
        ]
    )


def unflatten_body(flat: np.ndarray, num_joints: int = NUM_JOINTS) -> BodyParams:
    """Inverse of flatten_body; quaternions are normalized before conversion."""
    flat = np.asarray(flat, dtype=np.float64)
    if flat.shape != (param_dim(num_joints),):
        raise DomainError(f"Flat parameters must have {param_dim(num_joints)} entries, got {flat.shape}")
    phi, theta, beta, gamma = param_slices(num_joints)
    return BodyParams(
        phi=quat_to_matrix(flat[phi]),
        theta=quat_to_matrix(flat[theta].reshape(num_joints, 4)),
        beta=flat[beta],
        gamma=flat[gamma],
    )


def flatten_params(track: BodyTrack) -> np.ndarray:
    """T × F matrix of a fully observed track.

    Raises:
        DomainError: If the track has missing frames
    """
    return np.stack([flatten_body(p) for p in track.params()])


def unflatten_params(flat: np.ndarray, track_id: int = 0, frame_tag: str = "world") -> BodyTrack:
    """Rebuild a track from a T × F matrix."""
    flat = np.asarray(flat, dtype=np.float64)
    if flat.ndim != 2:
        raise DomainError(f"Expected a T × F matrix, got shape {flat.shape}")
    num_joints = (flat.shape[1] - 4 - NUM_BETAS - 3) // 4
    slots: List[BodyParams] = [unflatten_body(row, num_joints) for row in flat]
    return BodyTrack(track_id, tuple(slots), frame_tag)
