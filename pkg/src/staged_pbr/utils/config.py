"""Configuration management backed by YAML.

The packaged ``config.yaml`` holds every default. A user file (``--config``
or ``STAGED_PBR_CONFIG_FILE``) is layered on top of it, then
``STAGED_PBR__SECTION__KEY`` environment variables on top of that.
"""

from __future__ import annotations

import os
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Iterable

import yaml
from dotenv import load_dotenv

from staged_pbr.utils.exceptions import ConfigurationError

load_dotenv()

CONFIG_ENV_VAR = "STAGED_PBR_CONFIG_FILE"
DEFAULT_CONFIG_NAME = "config.yaml"
ENV_PREFIX = "STAGED_PBR__"
PACKAGE_ROOT = "staged_pbr"

PATH_FIELD_KEYS: set[tuple[str, ...]] = {
    ("logging", "dir"),
}

# (section, key) -> smallest allowed value
LOWER_BOUNDS: dict[tuple[str, ...], float] = {
    ("runtime", "threads"): 1,
    ("estimator", "chunk_size"): 1,
    ("estimator", "learning_rate"): 0.0,
    ("estimator", "iterations", "geometry"): 0,
    ("estimator", "iterations", "albedo"): 0,
    ("estimator", "iterations", "rss"): 0,
    ("estimator", "iterations", "finetune"): 0,
    ("evaluation", "heldout_lights"): 1,
    ("scene", "noise_sigma"): 0.0,
}


class ConfigNode(dict):
    """Dictionary with attribute-style access that keeps nested nodes wrapped."""

    def __init__(self, data: dict[str, Any]) -> None:
        super().__init__()
        for key, value in data.items():
            super().__setitem__(key, self._wrap(value))

    def __getattr__(self, name: str) -> Any:
        try:
            return self[name]
        except KeyError as exc:  # pragma: no cover - mirrors attr behaviour
            raise AttributeError(name) from exc

    def __setattr__(self, key: str, value: Any) -> None:
        self[key] = value

    def __setitem__(self, key: str, value: Any) -> None:
        super().__setitem__(key, self._wrap(value))

    @staticmethod
    def _wrap(value: Any) -> Any:
        if isinstance(value, dict) and not isinstance(value, ConfigNode):
            return ConfigNode(value)
        if isinstance(value, list):
            return [ConfigNode._wrap(item) for item in value]
        return value


class Config(ConfigNode):
    """Root configuration node."""

    def lookup(self, *path: str) -> Any:
        node: Any = self
        for segment in path:
            if not isinstance(node, dict) or segment not in node:
                raise ConfigurationError(f"missing configuration key {'.'.join(path)}")
            node = node[segment]
        return node


def _read_yaml(source: Any) -> dict[str, Any]:
    with source.open("r", encoding="utf-8") as handle:
        data = yaml.safe_load(handle) or {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"{source} must hold a mapping at the top level")
    return data


def _packaged_defaults() -> dict[str, Any]:
    return _read_yaml(resources.files(PACKAGE_ROOT).joinpath(DEFAULT_CONFIG_NAME))


def _coerce_env_value(raw_value: str) -> Any:
    try:
        return yaml.safe_load(raw_value)
    except yaml.YAMLError:
        return raw_value


def _apply_override(tree: dict[str, Any], path: Iterable[str], value: Any) -> None:
    current = tree
    segments = list(path)
    for segment in segments[:-1]:
        current = current.setdefault(segment, {})  # type: ignore[assignment]
    current[segments[-1]] = value


def _normalise_env_key(key: str) -> tuple[str, ...] | None:
    if not key.startswith(ENV_PREFIX):
        return None
    parts = [segment for segment in key[len(ENV_PREFIX) :].split("__") if segment]
    return tuple(part.lower() for part in parts) or None


def _load_env_overrides() -> dict[str, Any]:
    overrides: dict[str, Any] = {}
    for env_key, raw_value in os.environ.items():
        path = _normalise_env_key(env_key)
        if path:
            _apply_override(overrides, path, _coerce_env_value(raw_value))
    return overrides


def _deep_merge(base: dict[str, Any], overrides: dict[str, Any]) -> dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(merged.get(key), dict) and isinstance(value, dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _coerce_paths(data: dict[str, Any]) -> None:
    for path in PATH_FIELD_KEYS:
        parent: Any = data
        for segment in path[:-1]:
            parent = parent.get(segment) if isinstance(parent, dict) else None
        if isinstance(parent, dict) and isinstance(parent.get(path[-1]), str):
            parent[path[-1]] = Path(parent[path[-1]]).expanduser()


def _check_bounds(config: Config) -> None:
    for path, lowest in LOWER_BOUNDS.items():
        value = config.lookup(*path)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"{'.'.join(path)} must be a number, got {value!r}")
        if value < lowest:
            raise ConfigurationError(f"{'.'.join(path)} must be >= {lowest}, got {value}")
        if isinstance(lowest, int) and not isinstance(value, int):
            raise ConfigurationError(f"{'.'.join(path)} must be an integer, got {value!r}")


def _resolve_config_data(config_path: str | Path | None = None) -> Config:
    data = _packaged_defaults()
    path_override = config_path or os.environ.get(CONFIG_ENV_VAR)
    if path_override:
        data = _deep_merge(data, _read_yaml(Path(path_override).expanduser().resolve()))
    data = _deep_merge(data, _load_env_overrides())
    _coerce_paths(data)
    config = Config(data)
    _check_bounds(config)
    return config


@lru_cache(maxsize=4)
def get_config(config_path: str | Path | None = None) -> Config:
    """Load configuration, applying file and environment overrides.

    Raises:
        ConfigurationError: a required numeric key is missing or out of range.
        OSError: the override file cannot be read.
    """
    return _resolve_config_data(config_path)


__all__ = ["Config", "ConfigNode", "get_config"]
