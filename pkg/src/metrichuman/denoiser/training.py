"""Desk-scale training and sliding-window inference for the denoiser."""

import copy
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch

from ..core.error_handler import NumericalError
from ..core.geometry import PointCloud, quat_multiply
from ..core.synth import walking_track
from ..core.world_frame import BodyTrack
from .kinematics import TorchBodyModel
from .losses import discriminator_loss, split_flat, total_loss
from .model import DenoiserConfig, MotionDiscriminator, SceneAwareDenoiser
from .params import flatten_body, flatten_params, param_slices, unflatten_params

logger = logging.getLogger(__name__)


def _axis_angle_quats(rng: np.random.Generator, std: float, shape: Tuple[int, ...]) -> np.ndarray:
    rotvec = rng.normal(scale=std, size=shape + (3,))
    angle = np.linalg.norm(rotvec, axis=-1, keepdims=True)
    axis = np.divide(rotvec, angle, out=np.zeros_like(rotvec), where=angle > 0)
    return np.concatenate([np.cos(angle / 2), np.sin(angle / 2) * axis], axis=-1)


def perturb_flat(
    rng: np.random.Generator, flat: np.ndarray, noise: Tuple[float, float, float], num_joints: int
) -> np.ndarray:
    """Noisy copy of (..., F) parameters.

    Args:
        rng: Random generator
        flat: Clean flat parameters
        noise: (rotation std in rad, shape std, translation std in m)
        num_joints: Number of joints

    Returns:
        Perturbed parameters with unit quaternions
    """
    rot_std, beta_std, trans_std = noise
    phi, theta, beta, gamma = param_slices(num_joints)
    out = np.array(flat, dtype=np.float64)
    lead = out.shape[:-1]
    out[..., phi] = quat_multiply(out[..., phi], _axis_angle_quats(rng, rot_std, lead))
    thetas = out[..., theta].reshape(lead + (num_joints, 4))
    out[..., theta] = quat_multiply(thetas, _axis_angle_quats(rng, rot_std, lead + (num_joints,))).reshape(
        lead + (4 * num_joints,)
    )
    out[..., beta] += rng.normal(scale=beta_std, size=lead + (out[..., beta].shape[-1],))
    out[..., gamma] += rng.normal(scale=trans_std, size=lead + (3,))
    return out


def synthetic_sequences(num_sequences: int, length: int, seed: int) -> List[np.ndarray]:
    """Clean walking sequences as (length, F) flat matrices."""
    rng = np.random.Generator(np.random.PCG64(seed))
    sequences = []
    for _ in range(num_sequences):
        slots = walking_track(rng, 0, 1, length)
        sequences.append(np.stack([flatten_body(p) for p in slots]))
    return sequences


def scene_features(cloud: Optional[PointCloud], dtype: torch.dtype = torch.float32) -> Optional[torch.Tensor]:
    if cloud is None:
        return None
    return torch.as_tensor(cloud.features(), dtype=dtype)


class DenoiserTrainer:
    """Owns the optimizers and runs generator/discriminator updates."""

    def __init__(
        self,
        model: SceneAwareDenoiser,
        config: Optional[DenoiserConfig] = None,
        body_model: Optional[TorchBodyModel] = None,
        discriminator: Optional[MotionDiscriminator] = None,
    ):
        """Initialize trainer.

        Args:
            model: Denoiser to train (updated in place)
            config: Training settings (defaults to the model's config)
            body_model: Differentiable body model for the joint-motion losses
            discriminator: Optional discriminator for the adversarial term
        """
        self.model = model
        self.config = config or model.config
        self.dtype = next(model.parameters()).dtype
        self.body_model = (body_model or TorchBodyModel()).to(self.dtype)
        self.discriminator = discriminator
        self.optimizer = torch.optim.AdamW(
            model.parameters(), lr=self.config.learning_rate, weight_decay=self.config.weight_decay
        )
        self.disc_optimizer = (
            torch.optim.Adam(discriminator.parameters(), lr=self.config.discriminator_lr)
            if discriminator is not None
            else None
        )
        self.history: List[Dict[str, float]] = []

    def loss_terms(
        self,
        noisy: torch.Tensor,
        clean: torch.Tensor,
        features: Optional[torch.Tensor] = None,
    ) -> Dict[str, torch.Tensor]:
        pred = self.model(noisy, features)
        return total_loss(
            pred,
            clean,
            self.body_model,
            self.config.loss_weights,
            self.discriminator,
            self.config.supervise_global,
        )

    def train_step(
        self,
        noisy: torch.Tensor,
        clean: torch.Tensor,
        features: Optional[torch.Tensor] = None,
    ) -> Dict[str, float]:
        """One generator update (and one discriminator update when enabled).

        Raises:
            NumericalError: If the loss is not finite
        """
        self.model.train()
        terms = self.loss_terms(noisy, clean, features)
        total = terms["total"]
        if not torch.isfinite(total):
            raise NumericalError(
                "Denoiser loss is not finite",
                diagnostics={
                    "optimizer": "AdamW",
                    "iterations": len(self.history),
                    "last_loss": self.history[-1]["total"] if self.history else None,
                    "terms": {k: float(v.detach()) for k, v in terms.items()},
                },
            )
        self.optimizer.zero_grad()
        total.backward()
        self.optimizer.step()

        record = {k: float(v.detach()) for k, v in terms.items()}
        if self.discriminator is not None and self.disc_optimizer is not None:
            record["discriminator"] = self._update_discriminator(noisy, clean, features)
        self.history.append(record)
        logger.debug(f"Denoiser step {len(self.history)}: total={record['total']:.6f}")
        return record

    def _update_discriminator(
        self, noisy: torch.Tensor, clean: torch.Tensor, features: Optional[torch.Tensor]
    ) -> float:
        assert self.discriminator is not None and self.disc_optimizer is not None
        joints = self.model.num_joints
        with torch.no_grad():
            fake = self.model(noisy, features)
        _, real_theta, real_beta, _ = split_flat(clean, joints)
        _, fake_theta, fake_beta, _ = split_flat(fake, joints)
        loss = discriminator_loss(
            self.discriminator(real_theta, real_beta), self.discriminator(fake_theta, fake_beta)
        )
        self.disc_optimizer.zero_grad()
        loss.backward()
        self.disc_optimizer.step()
        return float(loss.detach())

    def sample_batch(
        self, rng: np.random.Generator, sequences: Sequence[np.ndarray]
    ) -> Tuple[torch.Tensor, torch.Tensor]:
        """Random windows (one shared length from train_window) with noisy copies."""
        low, high = self.config.train_window
        shortest = min(len(s) for s in sequences)
        length = int(rng.integers(min(low, shortest), min(high, shortest) + 1))
        clean = []
        for _ in range(self.config.batch_size):
            seq = sequences[int(rng.integers(len(sequences)))]
            start = int(rng.integers(0, len(seq) - length + 1))
            clean.append(seq[start : start + length])
        clean_arr = np.stack(clean)
        noisy_arr = perturb_flat(rng, clean_arr, self.config.train_noise, self.model.num_joints)
        return (
            torch.as_tensor(noisy_arr, dtype=self.dtype),
            torch.as_tensor(clean_arr, dtype=self.dtype),
        )

    def fit(
        self,
        sequences: Sequence[np.ndarray],
        cloud: Optional[PointCloud] = None,
        steps: Optional[int] = None,
    ) -> List[Dict[str, float]]:
        """Train for a number of steps on random windows of the given sequences."""
        steps = self.config.train_steps if steps is None else steps
        rng = np.random.Generator(np.random.PCG64(self.config.seed))
        features = scene_features(cloud, self.dtype)
        for step in range(steps):
            noisy, clean = self.sample_batch(rng, sequences)
            record = self.train_step(noisy, clean, features)
            if (step + 1) % max(1, steps // 10) == 0:
                logger.info(f"Training step {step + 1}/{steps}: loss {record['total']:.6f}")
        return self.history


def window_starts(num_frames: int, window: int) -> List[int]:
    """Start frames of consecutive windows; the last one is shifted back to end on the last frame."""
    if num_frames <= window:
        return [0]
    starts = list(range(0, num_frames - window, window))
    starts.append(num_frames - window)
    return starts


def denoise_track(
    model: SceneAwareDenoiser,
    track: BodyTrack,
    cloud: Optional[PointCloud] = None,
    window: Optional[int] = None,
) -> BodyTrack:
    """Denoise a fully observed world track window by window.

    The network runs in float64; each frame is written once, by the first window
    that covers it.
    """
    window = window or model.config.infer_window
    net = copy.deepcopy(model).to(torch.float64).eval()
    flat = torch.as_tensor(flatten_params(track), dtype=torch.float64)
    features = scene_features(cloud, torch.float64)
    out = torch.empty_like(flat)
    written = 0
    with torch.no_grad():
        for start in window_starts(len(flat), window):
            end = min(start + window, len(flat))
            result = net(flat[start:end], features)
            out[written:end] = result[written - start :]
            written = end
    logger.debug(f"Denoised track {track.track_id} ({len(flat)} frames, window {window})")
    return unflatten_params(out.numpy(), track.track_id, track.frame_tag)


def denoise(
    model: SceneAwareDenoiser,
    tracks: Sequence[BodyTrack],
    cloud: Optional[PointCloud] = None,
) -> List[BodyTrack]:
    """Denoise each track independently against the shared scene cloud."""
    return [denoise_track(model, track, cloud) for track in tracks]


def build_model(config: DenoiserConfig) -> SceneAwareDenoiser:
    """Seeded, identity-initialized denoiser."""
    torch.manual_seed(config.seed)
    return SceneAwareDenoiser(config)
