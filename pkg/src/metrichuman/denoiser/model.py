"""Scene-aware body-parameter denoiser.

Flat per-frame parameters are embedded with a linear layer plus temporal
positional embeddings (TPE), refined by a stack of pre-norm decoder layers that
self-attend over time and cross-attend to encoded scene tokens, and mapped back to
residual updates by four heads: rotation heads compose a unit quaternion with the
input rotation, the shape and translation heads add to their inputs.
"""

import logging
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional, Tuple

import torch
from torch import nn

from ..core.body_model import NUM_BETAS, NUM_JOINTS
from ..core.error_handler import DomainError
from .kinematics import quat_multiply, quat_normalize
from .params import param_dim, param_slices

logger = logging.getLogger(__name__)

SCENE_CONDITIONING = ("points", "zero")
POINT_CHANNELS = 7

LOSS_TERMS = ("phi", "theta", "beta", "gamma", "adversarial", "velocity", "acceleration")


def _default_loss_weights() -> Dict[str, float]:
    return {name: 1.0 for name in LOSS_TERMS}


@dataclass(frozen=True)
class DenoiserConfig:
    """Network size, windows and training settings."""

    enabled: bool = False
    weights_path: Optional[str] = None
    latent_dim: int = 64
    decoder_layers: int = 6
    attention_heads: int = 4
    feedforward_dim: int = 128
    scene_tokens: int = 16
    scene_grid: Tuple[int, int, int] = (4, 1, 4)
    joints: int = NUM_JOINTS
    train_window: Tuple[int, int] = (64, 128)
    infer_window: int = 100
    max_window: int = 128
    scene_conditioning: str = "points"
    supervise_global: bool = True
    learning_rate: float = 1e-5
    weight_decay: float = 0.01
    batch_size: int = 16
    train_steps: int = 200
    discriminator_lr: float = 1e-4
    train_noise: Tuple[float, float, float] = (0.1, 0.2, 0.05)
    seed: int = 0
    loss_weights: Dict[str, float] = field(default_factory=_default_loss_weights)

    def __post_init__(self) -> None:
        object.__setattr__(self, "scene_grid", tuple(int(g) for g in self.scene_grid))
        object.__setattr__(self, "train_window", tuple(int(w) for w in self.train_window))
        object.__setattr__(self, "train_noise", tuple(float(n) for n in self.train_noise))
        object.__setattr__(self, "loss_weights", {**_default_loss_weights(), **self.loss_weights})
        if self.latent_dim % self.attention_heads:
            raise DomainError(
                f"latent_dim {self.latent_dim} is not divisible by {self.attention_heads} heads"
            )
        if self.joints != NUM_JOINTS:
            raise DomainError(f"The body model has {NUM_JOINTS} joints, got {self.joints}")
        low, high = self.train_window
        if not 2 <= low <= high <= self.max_window:
            raise DomainError(f"train_window {self.train_window} must satisfy 2 <= lo <= hi <= max_window")
        if not 2 <= self.infer_window <= self.max_window:
            raise DomainError(f"infer_window {self.infer_window} must lie in [2, {self.max_window}]")
        if len(self.scene_grid) != 3 or math.prod(self.scene_grid) != self.scene_tokens:
            raise DomainError(f"scene_grid {self.scene_grid} must hold {self.scene_tokens} cells")
        if self.scene_tokens > self.max_window:
            raise DomainError("scene_tokens cannot exceed max_window (they share the TPE table)")
        if self.scene_conditioning not in SCENE_CONDITIONING:
            raise DomainError(f"scene_conditioning must be one of {SCENE_CONDITIONING}")
        unknown = set(self.loss_weights) - set(LOSS_TERMS)
        if unknown:
            raise DomainError(f"Unknown loss terms: {sorted(unknown)}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DenoiserConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        for key in ("scene_grid", "train_window", "train_noise"):
            data[key] = list(data[key])
        return data


class SceneEncoder(nn.Module):
    """Per-point MLP followed by max-pooling over a fixed voxel grid of the cloud's box."""

    def __init__(self, latent_dim: int, grid: Tuple[int, int, int]):
        super().__init__()
        self.grid = tuple(grid)
        self.num_tokens = math.prod(self.grid)
        self.point_mlp = nn.Sequential(
            nn.Linear(POINT_CHANNELS, latent_dim),
            nn.GELU(),
            nn.Linear(latent_dim, latent_dim),
        )
        self.null_token = nn.Parameter(torch.randn(latent_dim) * 0.02)

    def group_ids(self, xyz: torch.Tensor) -> torch.Tensor:
        """Voxel index of every point within the cloud's bounding box."""
        lo = xyz.min(dim=0).values
        hi = xyz.max(dim=0).values
        span = torch.where(hi > lo, hi - lo, torch.ones_like(hi))
        sizes = torch.tensor(self.grid, device=xyz.device)
        cells = torch.floor((xyz - lo) / span * sizes.to(xyz.dtype)).long()
        cells = torch.minimum(cells.clamp(min=0), sizes - 1)
        gy, gz = self.grid[1], self.grid[2]
        return cells[:, 0] * gy * gz + cells[:, 1] * gz + cells[:, 2]

    def forward(self, features: Optional[torch.Tensor]) -> torch.Tensor:
        """(L, 7) point features to (K, D) tokens; empty groups get the null token."""
        null = self.null_token.unsqueeze(0).expand(self.num_tokens, -1)
        if features is None or features.shape[0] == 0:
            return null
        if features.shape[-1] != POINT_CHANNELS:
            raise DomainError(f"Scene points need {POINT_CHANNELS} channels, got {features.shape[-1]}")
        hidden = self.point_mlp(features)
        ids = self.group_ids(features[:, :3].detach())
        pooled = torch.full(
            (self.num_tokens, hidden.shape[-1]), float("-inf"), dtype=hidden.dtype, device=hidden.device
        )
        pooled = pooled.scatter_reduce(
            0, ids.unsqueeze(-1).expand_as(hidden), hidden, reduce="amax", include_self=True
        )
        occupied = torch.zeros(self.num_tokens, dtype=torch.bool, device=hidden.device)
        occupied[ids] = True
        return torch.where(occupied.unsqueeze(-1), pooled, null)


class DecoderLayer(nn.Module):
    """Pre-norm self-attention, cross-attention and feedforward, all residual."""

    def __init__(self, latent_dim: int, heads: int, feedforward_dim: int):
        super().__init__()
        self.norm_self = nn.LayerNorm(latent_dim)
        self.self_attn = nn.MultiheadAttention(latent_dim, heads, batch_first=True)
        self.norm_cross = nn.LayerNorm(latent_dim)
        self.cross_attn = nn.MultiheadAttention(latent_dim, heads, batch_first=True)
        self.norm_ff = nn.LayerNorm(latent_dim)
        self.feedforward = nn.Sequential(
            nn.Linear(latent_dim, feedforward_dim),
            nn.GELU(),
            nn.Linear(feedforward_dim, latent_dim),
        )
        self.record_attention = False
        self.last_attention: Optional[Tuple[torch.Tensor, torch.Tensor]] = None

    def forward(self, x: torch.Tensor, memory: torch.Tensor) -> torch.Tensor:
        h = self.norm_self(x)
        attended, self_weights = self.self_attn(
            h, h, h, need_weights=self.record_attention, average_attn_weights=False
        )
        x = x + attended
        h = self.norm_cross(x)
        attended, cross_weights = self.cross_attn(
            h, memory, memory, need_weights=self.record_attention, average_attn_weights=False
        )
        x = x + attended
        x = x + self.feedforward(self.norm_ff(x))
        if self.record_attention:
            self.last_attention = (self_weights.detach(), cross_weights.detach())
        return x


class SceneAwareDenoiser(nn.Module):
    """Embedding, scene encoder, decoder stack and residual heads."""

    def __init__(self, config: Optional[DenoiserConfig] = None):
        super().__init__()
        self.config = config or DenoiserConfig()
        cfg = self.config
        dim = cfg.latent_dim
        self.num_joints = cfg.joints
        self.input_fc = nn.Linear(param_dim(cfg.joints), dim)
        self.tpe = nn.Parameter(torch.randn(cfg.max_window, dim) * 0.02)
        self.scene_encoder = SceneEncoder(dim, cfg.scene_grid)
        self.layers = nn.ModuleList(
            [DecoderLayer(dim, cfg.attention_heads, cfg.feedforward_dim) for _ in range(cfg.decoder_layers)]
        )
        self.phi_head = nn.Linear(dim, 4)
        self.theta_head = nn.Linear(dim, 4 * cfg.joints)
        self.beta_head = nn.Linear(dim, NUM_BETAS)
        self.gamma_head = nn.Linear(dim, 3)
        self.reset_heads()

    def reset_heads(self) -> None:
        """Zero head weights with identity biases, so the network starts as the identity map."""
        identity = torch.tensor([1.0, 0.0, 0.0, 0.0])
        with torch.no_grad():
            for head in (self.phi_head, self.theta_head, self.beta_head, self.gamma_head):
                head.weight.zero_()
                head.bias.zero_()
            self.phi_head.bias.copy_(identity)
            self.theta_head.bias.copy_(identity.repeat(self.num_joints))

    def set_attention_recording(self, enabled: bool) -> None:
        for layer in self.layers:
            layer.record_attention = enabled

    def attention_maps(self) -> List[Tuple[torch.Tensor, torch.Tensor]]:
        """(self, cross) attention weights of every layer from the last forward pass."""
        return [layer.last_attention for layer in self.layers if layer.last_attention is not None]

    def embed(self, flat: torch.Tensor) -> torch.Tensor:
        """z0[t] = FC(flat[t]) + TPE[t] for (B, T, F) input.

        Raises:
            DomainError: If T exceeds the TPE table
        """
        length = flat.shape[-2]
        if length > self.tpe.shape[0]:
            raise DomainError(f"Window of {length} frames exceeds the supported {self.tpe.shape[0]}")
        return self.input_fc(flat) + self.tpe[:length]

    def encode_scene(self, features: Optional[torch.Tensor]) -> torch.Tensor:
        """Scene tokens plus TPE, (K, D); constant zeros under zero conditioning."""
        tokens = self.scene_encoder.num_tokens
        if self.config.scene_conditioning == "zero":
            encoded = torch.zeros(tokens, self.tpe.shape[1], dtype=self.tpe.dtype, device=self.tpe.device)
        else:
            encoded = self.scene_encoder(features)
        return encoded + self.tpe[:tokens]

    def decode(self, z0: torch.Tensor, scene_tokens: torch.Tensor) -> torch.Tensor:
        """Run the decoder stack on (B, T, D) latents against (K, D) or (B, K, D) tokens."""
        if scene_tokens.dim() == 2:
            scene_tokens = scene_tokens.unsqueeze(0).expand(z0.shape[0], -1, -1)
        z = z0
        for layer in self.layers:
            z = layer(z, scene_tokens)
        return z

    def apply_heads(self, z1: torch.Tensor, flat0: torch.Tensor) -> torch.Tensor:
        """Residual update of the initial parameters.

        Raises:
            DomainError: If a rotation head emits a zero-norm quaternion
        """
        phi, theta, beta, gamma = param_slices(self.num_joints)
        batch_shape = flat0.shape[:-1]
        q_phi = quat_normalize(self.phi_head(z1))
        q_theta = quat_normalize(self.theta_head(z1).reshape(*batch_shape, self.num_joints, 4))
        phi1 = quat_multiply(q_phi, flat0[..., phi])
        theta1 = quat_multiply(q_theta, flat0[..., theta].reshape(*batch_shape, self.num_joints, 4))
        beta1 = self.beta_head(z1) + flat0[..., beta]
        gamma1 = self.gamma_head(z1) + flat0[..., gamma]
        return torch.cat([phi1, theta1.reshape(*batch_shape, -1), beta1, gamma1], dim=-1)

    def forward(self, flat0: torch.Tensor, scene_features: Optional[torch.Tensor] = None) -> torch.Tensor:
        """Denoise (B, T, F) or (T, F) flat parameters."""
        squeeze = flat0.dim() == 2
        if squeeze:
            flat0 = flat0.unsqueeze(0)
        z0 = self.embed(flat0)
        z1 = self.decode(z0, self.encode_scene(scene_features))
        out = self.apply_heads(z1, flat0)
        return out.squeeze(0) if squeeze else out


class MotionDiscriminator(nn.Module):
    """Real/fake scores for the whole pose, the shape and each joint rotation.

    Output (..., J + 2) in [0, 1]: [pose, shape, joint_1..joint_J].
    """

    def __init__(self, num_joints: int = NUM_JOINTS, hidden: int = 64):
        super().__init__()
        self.num_joints = num_joints
        self.pose = nn.Sequential(nn.Linear(4 * num_joints, hidden), nn.GELU(), nn.Linear(hidden, 1))
        self.shape = nn.Sequential(nn.Linear(NUM_BETAS, hidden), nn.GELU(), nn.Linear(hidden, 1))
        self.joint_features = nn.Sequential(nn.Linear(4, hidden), nn.GELU())
        self.joint_weight = nn.Parameter(torch.randn(num_joints, hidden) * 0.02)
        self.joint_bias = nn.Parameter(torch.zeros(num_joints))

    @property
    def num_factors(self) -> int:
        return self.num_joints + 2

    def forward(self, theta: torch.Tensor, beta: torch.Tensor) -> torch.Tensor:
        """Scores from (..., J, 4) joint quaternions and (..., 10) shapes."""
        # q and −q are the same rotation.
        sign = torch.where(theta[..., :1] < 0, -torch.ones_like(theta[..., :1]), torch.ones_like(theta[..., :1]))
        theta = theta * sign
        pose = self.pose(theta.flatten(-2))
        shape = self.shape(beta)
        joints = (self.joint_features(theta) * self.joint_weight).sum(-1) + self.joint_bias
        return torch.sigmoid(torch.cat([pose, shape, joints], dim=-1))
