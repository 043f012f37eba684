"""Training losses of the denoiser.

Per-frame terms are summed over their components and averaged over frames (and
batch); the joint-motion terms are summed over time and joints per sequence and
averaged over the batch.
"""

from typing import Dict, Mapping, Optional, Tuple

import torch

from ..core.error_handler import DomainError
from .kinematics import TorchBodyModel
from .model import MotionDiscriminator
from .params import param_slices


def loss_rotation(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean of 1 − |⟨q, q*⟩| over all leading dimensions."""
    return (1.0 - (pred * target).sum(-1).abs()).mean()


def loss_l1(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Sum of absolute differences over the last dimension, averaged over the rest."""
    per_frame = (pred - target).abs().sum(-1)
    return per_frame.mean() if per_frame.dim() else per_frame


def _safe_norm(v: torch.Tensor) -> torch.Tensor:
    """Euclidean norm with a zero (not NaN) gradient at the origin."""
    squared = (v * v).sum(-1)
    positive = squared > 0
    safe = torch.where(positive, squared, torch.ones_like(squared))
    return torch.where(positive, torch.sqrt(safe), torch.zeros_like(squared))


def loss_motion(pred_joints: torch.Tensor, target_joints: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
    """L1 mismatch of joint speed and acceleration magnitudes.

    Args:
        pred_joints: (..., T, J, 3)
        target_joints: same shape

    Returns:
        Tuple of (velocity loss, acceleration loss)

    Raises:
        DomainError: If fewer than 3 frames are given
    """
    if pred_joints.shape != target_joints.shape:
        raise DomainError(f"Joint shapes differ: {tuple(pred_joints.shape)} vs {tuple(target_joints.shape)}")
    if pred_joints.shape[-3] < 3:
        raise DomainError(f"Motion losses need at least 3 frames, got {pred_joints.shape[-3]}")

    def velocity(j: torch.Tensor) -> torch.Tensor:
        return j[..., 1:, :, :] - j[..., :-1, :, :]

    def acceleration(j: torch.Tensor) -> torch.Tensor:
        return j[..., 2:, :, :] - 2.0 * j[..., 1:-1, :, :] + j[..., :-2, :, :]

    vel = (_safe_norm(velocity(pred_joints)) - _safe_norm(velocity(target_joints))).abs()
    acc = (_safe_norm(acceleration(pred_joints)) - _safe_norm(acceleration(target_joints))).abs()
    vel_loss = vel.sum(dim=(-2, -1))
    acc_loss = acc.sum(dim=(-2, -1))
    return vel_loss.mean(), acc_loss.mean()


def generator_adversarial_loss(scores: torch.Tensor) -> torch.Tensor:
    """Σ_factors (1 − C)² per frame, averaged over frames."""
    per_frame = ((1.0 - scores) ** 2).sum(-1)
    return per_frame.mean() if per_frame.dim() else per_frame


def discriminator_loss(real_scores: torch.Tensor, fake_scores: torch.Tensor) -> torch.Tensor:
    """Least squares toward 1 on real samples and 0 on generated ones."""
    return generator_adversarial_loss(real_scores) + (fake_scores**2).sum(-1).mean()


def split_flat(flat: torch.Tensor, num_joints: int) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
    """(Φ quat, θ quats (..., J, 4), β, Γ) views of flat parameters."""
    phi, theta, beta, gamma = param_slices(num_joints)
    return (
        flat[..., phi],
        flat[..., theta].reshape(*flat.shape[:-1], num_joints, 4),
        flat[..., beta],
        flat[..., gamma],
    )


def total_loss(
    pred: torch.Tensor,
    target: torch.Tensor,
    body_model: TorchBodyModel,
    weights: Mapping[str, float],
    discriminator: Optional[MotionDiscriminator] = None,
    supervise_global: bool = True,
) -> Dict[str, torch.Tensor]:
    """Weighted sum of all supervision terms for (B, T, F) predictions.

    Without supervise_global the Φ and Γ terms are dropped; joints are then compared
    in the body frame (global orientation and translation removed from both).

    Returns:
        Dict of the individual terms and "total"
    """
    num_joints = body_model.num_joints
    p_phi, p_theta, p_beta, p_gamma = split_flat(pred, num_joints)
    t_phi, t_theta, t_beta, t_gamma = split_flat(target, num_joints)

    terms: Dict[str, torch.Tensor] = {
        "theta": loss_rotation(p_theta, t_theta),
        "beta": loss_l1(p_beta, t_beta),
    }
    if supervise_global:
        terms["phi"] = loss_rotation(p_phi, t_phi)
        terms["gamma"] = loss_l1(p_gamma, t_gamma)
        pred_joints = body_model(p_phi, p_theta, p_beta, p_gamma)
        target_joints = body_model(t_phi, t_theta, t_beta, t_gamma)
    else:
        identity = torch.zeros_like(p_phi)
        identity[..., 0] = 1.0
        origin = torch.zeros_like(p_gamma)
        pred_joints = body_model(identity, p_theta, p_beta, origin)
        target_joints = body_model(identity, t_theta, t_beta, origin)
    terms["velocity"], terms["acceleration"] = loss_motion(pred_joints, target_joints)
    if discriminator is not None and weights.get("adversarial", 0.0) > 0:
        terms["adversarial"] = generator_adversarial_loss(discriminator(p_theta, p_beta))

    total = sum(weights.get(name, 1.0) * value for name, value in terms.items())
    terms["total"] = total  # type: ignore[assignment]
    return terms
