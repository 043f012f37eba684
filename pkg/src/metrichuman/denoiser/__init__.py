"""Scene-aware body-parameter denoiser."""

from .model import DenoiserConfig, MotionDiscriminator, SceneAwareDenoiser
from .params import flatten_params, param_dim, unflatten_params
from .training import DenoiserTrainer, build_model, denoise, denoise_track
from .weights_io import load_model, save_model

__all__ = [
    "DenoiserConfig",
    "DenoiserTrainer",
    "MotionDiscriminator",
    "SceneAwareDenoiser",
    "build_model",
    "denoise",
    "denoise_track",
    "flatten_params",
    "load_model",
    "param_dim",
    "save_model",
    "unflatten_params",
]
