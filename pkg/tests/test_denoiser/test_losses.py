"""Tests for the denoiser losses."""

import pytest
import torch

from metrichuman.core.body_model import BodyParams
from metrichuman.core.error_handler import DomainError
from metrichuman.denoiser.kinematics import TorchBodyModel
from metrichuman.denoiser.losses import (
    discriminator_loss,
    generator_adversarial_loss,
    loss_l1,
    loss_motion,
    loss_rotation,
    total_loss,
)
from metrichuman.denoiser.model import MotionDiscriminator
from metrichuman.denoiser.params import flatten_body


class TestRotationLoss:
    """Test loss_rotation."""

    def setup_method(self):
        self.q = torch.tensor([0.5, 0.5, 0.5, 0.5])

    def test_same(self):
        assert float(loss_rotation(self.q, self.q)) == pytest.approx(0.0)

    def test_antipodal(self):
        assert float(loss_rotation(-self.q, self.q)) == pytest.approx(0.0)

    def test_orthogonal(self):
        other = torch.tensor([0.5, -0.5, 0.5, -0.5])
        assert float(loss_rotation(other, self.q)) == pytest.approx(1.0)

    def test_averages_over_leading_dims(self):
        pred = torch.stack([self.q, torch.tensor([0.5, -0.5, 0.5, -0.5])])
        assert float(loss_rotation(pred, self.q.expand(2, 4))) == pytest.approx(0.5)


class TestL1Loss:
    """Test loss_l1."""

    def test_sum_over_components(self):
        assert float(loss_l1(torch.tensor([1.0, 2.0]), torch.zeros(2))) == pytest.approx(3.0)

    def test_mean_over_frames(self):
        pred = torch.tensor([[1.0, 2.0], [0.0, 0.0]])
        assert float(loss_l1(pred, torch.zeros(2, 2))) == pytest.approx(1.5)


class TestMotionLoss:
    """Test loss_motion."""

    def test_constant_velocity_against_static(self):
        """One joint moving 1 per frame over 3 frames: speeds differ by 1 twice, no acceleration."""
        target = torch.zeros(3, 1, 3)
        pred = torch.zeros(3, 1, 3)
        pred[:, 0, 0] = torch.tensor([0.0, 1.0, 2.0])
        velocity, acceleration = loss_motion(pred, target)
        assert float(velocity) == pytest.approx(2.0)
        assert float(acceleration) == pytest.approx(0.0)

    def test_batch_mean(self):
        target = torch.zeros(2, 3, 1, 3)
        pred = torch.zeros(2, 3, 1, 3)
        pred[0, :, 0, 0] = torch.tensor([0.0, 1.0, 2.0])
        velocity, _ = loss_motion(pred, target)
        assert float(velocity) == pytest.approx(1.0)

    def test_finite_gradient_when_still(self):
        pred = torch.zeros(4, 2, 3, requires_grad=True)
        velocity, acceleration = loss_motion(pred, torch.zeros(4, 2, 3))
        (velocity + acceleration).backward()
        assert bool(torch.isfinite(pred.grad).all())

    def test_needs_three_frames(self):
        with pytest.raises(DomainError):
            loss_motion(torch.zeros(2, 1, 3), torch.zeros(2, 1, 3))

    def test_shape_mismatch(self):
        with pytest.raises(DomainError):
            loss_motion(torch.zeros(3, 1, 3), torch.zeros(3, 2, 3))


class TestAdversarialLoss:
    """Test the least-squares adversarial terms."""

    def test_generator_fools(self):
        assert float(generator_adversarial_loss(torch.ones(5, 24))) == 0.0

    def test_generator_caught(self):
        assert float(generator_adversarial_loss(torch.zeros(5, 24))) == pytest.approx(24.0)

    def test_perfect_discriminator(self):
        assert float(discriminator_loss(torch.ones(3, 24), torch.zeros(3, 24))) == 0.0


class TestTotalLoss:
    """Test total_loss."""

    def setup_method(self):
        flat = torch.as_tensor(flatten_body(BodyParams.identity()), dtype=torch.float32)
        self.target = flat.expand(1, 4, -1).clone()
        self.body = TorchBodyModel()

    def test_zero_at_target(self):
        terms = total_loss(self.target.clone(), self.target, self.body, {})
        for name in ("phi", "theta", "beta", "gamma", "velocity", "acceleration", "total"):
            assert float(terms[name]) == pytest.approx(0.0, abs=1e-6)
        assert "adversarial" not in terms

    def test_weights_scale_terms(self):
        pred = self.target.clone()
        pred[..., 92] += 1.0
        terms = total_loss(pred, self.target, self.body, {"beta": 3.0})
        assert float(terms["beta"]) == pytest.approx(1.0)
        assert float(terms["total"]) == pytest.approx(3.0 + float(terms["velocity"]) + float(terms["acceleration"]))

    def test_local_supervision_drops_global_terms(self):
        pred = self.target.clone()
        pred[..., 102] += 5.0
        terms = total_loss(pred, self.target, self.body, {}, supervise_global=False)
        assert "phi" not in terms
        assert "gamma" not in terms
        assert float(terms["total"]) == pytest.approx(0.0, abs=1e-6)

    def test_adversarial_term(self):
        terms = total_loss(self.target.clone(), self.target, self.body, {"adversarial": 1.0}, MotionDiscriminator())
        assert 0.0 <= float(terms["adversarial"]) <= 24.0

    def test_adversarial_weight_zero_skips_discriminator(self):
        terms = total_loss(self.target.clone(), self.target, self.body, {"adversarial": 0.0}, MotionDiscriminator())
        assert "adversarial" not in terms
