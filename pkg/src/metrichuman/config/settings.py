"""Pipeline settings management."""

import copy
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

from ..core.error_handler import ConfigurationError
from .defaults import DEFAULT_CONFIG, OPTIONAL_STRING_KEYS

logger = logging.getLogger(__name__)


def _type_matches(default: Any, value: Any) -> bool:
    if isinstance(default, bool):
        return isinstance(value, bool)
    if isinstance(default, float):
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if isinstance(default, int):
        return isinstance(value, int) and not isinstance(value, bool)
    if isinstance(default, list):
        return isinstance(value, list) and len(value) == len(default)
    if isinstance(default, str):
        return isinstance(value, str)
    return True


def _merge(base: Dict[str, Any], override: Dict[str, Any], prefix: str = "") -> None:
    """Deep-merge override into base, rejecting unknown keys and wrong types."""
    for key, value in override.items():
        dotted = f"{prefix}{key}"
        if key not in base:
            raise ConfigurationError(f"Unknown configuration key: {dotted}", key=dotted)
        default = base[key]
        if isinstance(default, dict):
            if not isinstance(value, dict):
                raise ConfigurationError(f"Configuration key {dotted} must be a section", key=dotted)
            _merge(default, value, f"{dotted}.")
            continue
        if default is None:
            if value is not None and not (dotted in OPTIONAL_STRING_KEYS and isinstance(value, str)):
                raise ConfigurationError(f"Configuration key {dotted} must be a string or null", key=dotted)
        elif not _type_matches(default, value):
            raise ConfigurationError(
                f"Configuration key {dotted} expects {type(default).__name__}, "
                f"got {type(value).__name__}",
                key=dotted,
            )
        elif isinstance(default, float):
            value = float(value)
        base[key] = value


class PipelineSettings:
    """Manages pipeline settings: defaults merged with one optional JSON file."""

    def __init__(self, config_file: Optional[Union[str, Path]] = None):
        """Initialize settings.

        Args:
            config_file: Path to a JSON configuration file (optional)

        Raises:
            ConfigurationError: If the file is missing, malformed, or holds
                unknown keys or mistyped values
        """
        self.config_file = Path(config_file) if config_file else None
        self.settings = self._load_settings()

    def _load_settings(self) -> Dict[str, Any]:
        """Load settings from file merged over defaults.

        Returns:
            Settings dictionary
        """
        settings = copy.deepcopy(DEFAULT_CONFIG)
        if self.config_file is None:
            return settings

        try:
            with open(self.config_file, "r") as f:
                loaded = json.load(f)
        except FileNotFoundError:
            raise ConfigurationError(
                f"Configuration file not found: {self.config_file}", key=str(self.config_file)
            )
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"Configuration file is not valid JSON: {e}")
        if not isinstance(loaded, dict):
            raise ConfigurationError("Configuration file must hold a JSON object")

        _merge(settings, loaded)
        logger.info(f"Loaded settings from {self.config_file}")
        return settings

    def merge(self, overrides: Dict[str, Any]) -> None:
        """Deep-merge a dict of overrides (same validation as a config file)."""
        _merge(self.settings, copy.deepcopy(overrides))

    def get(self, key: str, default: Any = None) -> Any:
        """Get a setting value.

        Args:
            key: Setting key (supports dot notation like 'slam.max_iters')
            default: Default value if key not found

        Returns:
            Setting value or default
        """
        value: Any = self.settings
        try:
            for k in key.split("."):
                value = value[k]
            return value
        except (KeyError, TypeError):
            return default

    def set(self, key: str, value: Any) -> None:
        """Set a setting value.

        Args:
            key: Setting key (dot notation)
            value: Value to set

        Raises:
            ConfigurationError: If the key is unknown or the value mistyped
        """
        override: Dict[str, Any] = {}
        target = override
        keys = key.split(".")
        for k in keys[:-1]:
            target[k] = {}
            target = target[k]
        target[keys[-1]] = value
        _merge(self.settings, override)
        logger.debug(f"Setting {key} = {value}")

    def section(self, name: str) -> Dict[str, Any]:
        """Deep copy of one configuration section.

        Raises:
            ConfigurationError: If the section does not exist
        """
        value = self.settings.get(name)
        if not isinstance(value, dict):
            raise ConfigurationError(f"Unknown configuration section: {name}", key=name)
        return copy.deepcopy(value)

    @property
    def seed(self) -> int:
        return int(self.settings["seed"])

    def reset_to_defaults(self) -> None:
        """Reset all settings to defaults."""
        self.settings = copy.deepcopy(DEFAULT_CONFIG)
        logger.info("Settings reset to defaults")

    def export_settings(self, file_path: Union[str, Path]) -> None:
        """Export settings as canonical JSON.

        Args:
            file_path: Path to export file
        """
        path = Path(file_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as f:
            json.dump(self.settings, f, indent=2, sort_keys=True)
            f.write("\n")
        logger.info(f"Settings exported to {path}")

    def __getitem__(self, key: str) -> Any:
        """Allow dictionary-style access."""
        return self.get(key)

    def __setitem__(self, key: str, value: Any) -> None:
        """Allow dictionary-style assignment."""
        self.set(key, value)
