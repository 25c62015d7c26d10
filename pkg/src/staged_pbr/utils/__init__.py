"""Utility functions and helpers."""

from .config import Config, ConfigNode, get_config
from .exceptions import StagedPBRError

__all__ = ["Config", "ConfigNode", "StagedPBRError", "get_config"]
