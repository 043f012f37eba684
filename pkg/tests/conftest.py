"""Pytest configuration and fixtures."""

import numpy as np
import pytest

from metrichuman.config.settings import PipelineSettings
from metrichuman.core.body_model import default_template
from metrichuman.core.formats import write_scene
from metrichuman.core.geometry import Intrinsics
from metrichuman.core.synth import SynthConfig, generate
from metrichuman.denoiser import DenoiserConfig

SMALL_SCENE = dict(num_frames=4, width=64, height=48, anchors_per_frame=32)


@pytest.fixture
def rng():
    """Seeded generator for random test inputs."""
    return np.random.Generator(np.random.PCG64(1234))


@pytest.fixture
def intr():
    """Intrinsics with fx = fy = 100 and the principal point at (50, 50)."""
    return Intrinsics(fx=100.0, fy=100.0, cx=50.0, cy=50.0, width=100, height=100)


@pytest.fixture(scope="session")
def template():
    return default_template()


@pytest.fixture(scope="session")
def small_config():
    return SynthConfig(**SMALL_SCENE)


@pytest.fixture(scope="session")
def scenario(small_config):
    """Noise-free four-frame scenario with one walking body."""
    return generate(7, small_config)


@pytest.fixture(scope="session")
def scene_dir(tmp_path_factory, scenario):
    """Scene directory written from the shared scenario."""
    return write_scene(tmp_path_factory.mktemp("scene"), scenario)


TINY_DENOISER = dict(
    latent_dim=16,
    decoder_layers=2,
    attention_heads=2,
    feedforward_dim=32,
    scene_tokens=4,
    scene_grid=[2, 1, 2],
    train_window=[4, 8],
    infer_window=8,
    max_window=16,
    batch_size=2,
    train_steps=3,
)


@pytest.fixture
def settings():
    """Pipeline settings for the small scene with a tiny denoiser."""
    settings = PipelineSettings()
    settings.merge({"seed": 7, "synth": dict(SMALL_SCENE), "denoiser": dict(TINY_DENOISER)})
    return settings


@pytest.fixture
def denoiser_config():
    return DenoiserConfig.from_dict(TINY_DENOISER)
