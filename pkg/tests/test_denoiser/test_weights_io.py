"""Tests for the weights file."""

import json

import pytest
import torch

from metrichuman.core.error_handler import FormatError
from metrichuman.denoiser import MotionDiscriminator, build_model, load_model, save_model
from metrichuman.denoiser.model import DenoiserConfig
from metrichuman.denoiser.weights_io import load_weights, save_weights


class TestWeightsFile:
    """Test save_weights and load_weights."""

    def test_round_trip(self, tmp_path):
        tensors = {"a": torch.arange(6.0).reshape(2, 3), "b": torch.tensor([0.1], dtype=torch.float64)}
        save_weights(tmp_path / "w.bin", tensors, {"note": "x"})
        loaded, metadata = load_weights(tmp_path / "w.bin")
        assert list(loaded) == ["a", "b"]
        assert loaded["a"].dtype == torch.float64
        torch.testing.assert_close(loaded["a"], tensors["a"].double())
        assert float(loaded["b"]) == 0.1
        assert metadata == {"note": "x"}

    def test_header_is_json(self, tmp_path):
        save_weights(tmp_path / "w.bin", {"a": torch.zeros(2)})
        blob = (tmp_path / "w.bin").read_bytes()
        size = int.from_bytes(blob[:8], "little")
        header = json.loads(blob[8 : 8 + size])
        assert header["tensors"] == [{"name": "a", "offset": 0, "shape": [2]}]
        assert len(blob) == 8 + size + 16

    def test_truncated(self, tmp_path):
        (tmp_path / "w.bin").write_bytes(b"\x01")
        with pytest.raises(FormatError):
            load_weights(tmp_path / "w.bin")

    def test_values_cut_short(self, tmp_path):
        save_weights(tmp_path / "w.bin", {"a": torch.zeros(4)})
        blob = (tmp_path / "w.bin").read_bytes()
        (tmp_path / "w.bin").write_bytes(blob[:-8])
        with pytest.raises(FormatError, match="runs past the end"):
            load_weights(tmp_path / "w.bin")

    def test_wrong_format(self, tmp_path):
        header = json.dumps({"format": "other", "tensors": []}).encode()
        (tmp_path / "w.bin").write_bytes(len(header).to_bytes(8, "little") + header)
        with pytest.raises(FormatError):
            load_weights(tmp_path / "w.bin")

    def test_bad_header(self, tmp_path):
        (tmp_path / "w.bin").write_bytes((4).to_bytes(8, "little") + b"{{{{")
        with pytest.raises(FormatError):
            load_weights(tmp_path / "w.bin")


class TestModelWeights:
    """Test save_model and load_model."""

    def test_round_trip(self, tmp_path, denoiser_config):
        model = build_model(denoiser_config)
        with torch.no_grad():
            model.gamma_head.weight.normal_()
        save_model(tmp_path / "weights.bin", model)
        loaded, discriminator = load_model(tmp_path / "weights.bin")
        assert discriminator is None
        assert loaded.config.latent_dim == denoiser_config.latent_dim
        for (name, x), (_, y) in zip(model.state_dict().items(), loaded.state_dict().items()):
            assert torch.equal(x, y), name

    def test_stored_architecture_wins(self, tmp_path, denoiser_config):
        save_model(tmp_path / "weights.bin", build_model(denoiser_config))
        loaded, _ = load_model(tmp_path / "weights.bin", DenoiserConfig())
        assert loaded.config.decoder_layers == denoiser_config.decoder_layers

    def test_discriminator_round_trip(self, tmp_path, denoiser_config):
        disc = MotionDiscriminator()
        save_model(tmp_path / "weights.bin", build_model(denoiser_config), disc)
        _, loaded = load_model(tmp_path / "weights.bin")
        assert loaded is not None
        torch.testing.assert_close(loaded.joint_weight, disc.joint_weight)

    def test_mismatched_tensors(self, tmp_path, denoiser_config):
        model = build_model(denoiser_config)
        tensors = {f"denoiser.{k}": v for k, v in model.state_dict().items()}
        tensors["denoiser.gamma_head.bias"] = torch.zeros(5)
        save_weights(tmp_path / "weights.bin", tensors, {"config": denoiser_config.to_dict()})
        with pytest.raises(FormatError):
            load_model(tmp_path / "weights.bin")
