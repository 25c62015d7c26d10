"""Counter-based random streams.

Every draw comes from a fresh Philox generator keyed by (seed, purpose, index),
so a value depends only on those integers and never on call order or on which
worker asks for it.
"""

from __future__ import annotations

import zlib

import numpy as np

from staged_pbr.utils.exceptions import ParameterError

PURPOSE_RANDOM_LIGHT = "random_light"
PURPOSE_OBSERVATION_NOISE = "observation_noise"


def _purpose_code(purpose: str) -> int:
    return zlib.crc32(purpose.encode("utf-8"))


def stream(seed: int, purpose: str, index: int = 0) -> np.random.Generator:
    """Return the generator for one (seed, purpose, index) key."""
    if seed < 0 or index < 0:
        raise ParameterError(f"seed and index must be non-negative, got seed={seed} index={index}")
    key = np.random.SeedSequence([int(seed), _purpose_code(purpose), int(index)])
    return np.random.Generator(np.random.Philox(key))


def uniforms(seed: int, purpose: str, index: int, count: int) -> np.ndarray:
    return stream(seed, purpose, index).random(count)


__all__ = ["stream", "uniforms", "PURPOSE_RANDOM_LIGHT", "PURPOSE_OBSERVATION_NOISE"]
