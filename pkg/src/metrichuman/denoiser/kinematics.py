"""Differentiable quaternion algebra and body posing in torch."""

from typing import Optional

import numpy as np
import torch
from torch import nn

from ..core.body_model import NUM_BETAS, BodyTemplate, default_template
from ..core.error_handler import DomainError

QUAT_EPS = 1e-12


def quat_normalize(q: torch.Tensor) -> torch.Tensor:
    """Unit quaternions; a zero-norm input is an error, never silently fixed.

    Raises:
        DomainError: If any quaternion has (near) zero norm
    """
    norm = torch.linalg.vector_norm(q, dim=-1, keepdim=True)
    if bool((norm <= QUAT_EPS).any()):
        raise DomainError("Cannot normalize a zero-norm quaternion")
    return q / norm


def quat_multiply(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Hamilton product a ⊗ b of (..., 4) tensors."""
    aw, ax, ay, az = a.unbind(-1)
    bw, bx, by, bz = b.unbind(-1)
    return torch.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        dim=-1,
    )


def quat_to_matrix(q: torch.Tensor) -> torch.Tensor:
    """(..., 4) unit quaternions to (..., 3, 3) rotation matrices."""
    w, x, y, z = q.unbind(-1)
    rows = [
        torch.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], dim=-1),
        torch.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], dim=-1),
        torch.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], dim=-1),
    ]
    return torch.stack(rows, dim=-2)


class TorchBodyModel(nn.Module):
    """Template posing in torch; returns regressed joints of the posed mesh."""

    def __init__(self, template: Optional[BodyTemplate] = None):
        super().__init__()
        template = template or default_template()
        self.parents = tuple(int(p) for p in template.joint_parents)
        self.register_buffer("rest_vertices", torch.as_tensor(template.rest_vertices, dtype=torch.float32))
        self.register_buffer("shape_basis", torch.as_tensor(template.shape_basis, dtype=torch.float32))
        self.register_buffer("regressor", torch.as_tensor(template.joint_regressor, dtype=torch.float32))
        self.register_buffer("vertex_part", torch.as_tensor(np.asarray(template.vertex_part), dtype=torch.long))

    @property
    def num_joints(self) -> int:
        return len(self.parents)

    def forward(
        self,
        phi: torch.Tensor,
        theta: torch.Tensor,
        beta: torch.Tensor,
        gamma: torch.Tensor,
    ) -> torch.Tensor:
        """Posed joints.

        Args:
            phi: (..., 4) unit quaternions
            theta: (..., J, 4) unit quaternions
            beta: (..., 10)
            gamma: (..., 3)

        Returns:
            (..., J, 3) joint locations
        """
        if beta.shape[-1] != NUM_BETAS:
            raise DomainError(f"beta must have {NUM_BETAS} entries, got {beta.shape[-1]}")
        vertices = self.rest_vertices + torch.einsum("...k,kvc->...vc", beta, self.shape_basis)
        joints = torch.einsum("jv,...vc->...jc", self.regressor, vertices)
        local = quat_to_matrix(theta)

        rotations = []
        positions = []
        for j, parent in enumerate(self.parents):
            if parent < 0:
                rotations.append(local[..., j, :, :])
                positions.append(joints[..., j, :])
            else:
                rotations.append(rotations[parent] @ local[..., j, :, :])
                offset = (joints[..., j, :] - joints[..., parent, :]).unsqueeze(-1)
                positions.append((rotations[parent] @ offset).squeeze(-1) + positions[parent])
        rot = torch.stack(rotations, dim=-3)
        pos = torch.stack(positions, dim=-2)

        part = self.vertex_part
        local_vertices = vertices - joints[..., part, :]
        posed = (rot[..., part, :, :] @ local_vertices.unsqueeze(-1)).squeeze(-1) + pos[..., part, :]
        center = joints[..., :1, :]
        global_rot = quat_to_matrix(phi).unsqueeze(-3)
        world = ((global_rot @ (posed - center).unsqueeze(-1)).squeeze(-1) + center + gamma.unsqueeze(-2))
        return torch.einsum("jv,...vc->...jc", self.regressor, world)
