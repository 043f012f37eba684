"""Configuration defaults and settings loader."""

from .defaults import DEFAULT_CONFIG
from .settings import PipelineSettings

__all__ = ["DEFAULT_CONFIG", "PipelineSettings"]
