"""Portable float map (PFM) reader and writer.

Only little-endian files are produced and accepted: header ``PF`` (RGB) or
``Pf`` (gray), an ASCII ``width height`` line, the scale line ``-1.0`` and
rows stored bottom-to-top as 32-bit floats.
"""

from __future__ import annotations

from pathlib import Path
from typing import Union

import numpy as np

from staged_pbr.monitoring.logging import get_logger
from staged_pbr.utils.exceptions import (
    DimensionError,
    PFMChannelError,
    PFMEndiannessError,
    PFMHeaderError,
    PFMTruncatedError,
)

logger = get_logger(__name__)

FLOAT_SIZE = 4
_TAGS = {b"PF": 3, b"Pf": 1}

PathLike = Union[str, Path]


def encode_pfm(image: np.ndarray) -> bytes:
    image = np.asarray(image)
    if image.ndim == 3 and image.shape[2] == 1:
        image = image[..., 0]
    if image.ndim == 2:
        tag = b"Pf"
    elif image.ndim == 3 and image.shape[2] == 3:
        tag = b"PF"
    else:
        raise DimensionError(f"PFM images must be HxW or HxWx3, got {image.shape}")
    height, width = image.shape[:2]
    header = tag + b"\n" + f"{width} {height}\n".encode("ascii") + b"-1.0\n"
    payload = np.ascontiguousarray(np.flipud(image), dtype="<f4").tobytes()
    return header + payload


def _next_line(data: bytes, offset: int) -> tuple[bytes, int]:
    end = data.find(b"\n", offset)
    if end < 0:
        raise PFMHeaderError("header ends before its newline")
    return data[offset:end].strip(), end + 1


def decode_pfm(data: bytes) -> np.ndarray:
    tag, offset = _next_line(data, 0)
    if tag not in _TAGS:
        raise PFMHeaderError(f"bad magic {tag[:8]!r}, expected PF or Pf")
    channels = _TAGS[tag]

    dims, offset = _next_line(data, offset)
    try:
        width, height = (int(x) for x in dims.split())
    except ValueError as exc:
        raise PFMHeaderError(f"bad dimension line {dims[:32]!r}") from exc
    if width <= 0 or height <= 0:
        raise PFMHeaderError(f"non-positive dimensions {width}x{height}")

    scale_line, offset = _next_line(data, offset)
    try:
        scale = float(scale_line)
    except ValueError as exc:
        raise PFMHeaderError(f"bad scale line {scale_line[:32]!r}") from exc
    if scale == 0.0 or not np.isfinite(scale):
        raise PFMHeaderError(f"scale must be a non-zero number, got {scale}")
    if scale > 0.0:
        raise PFMEndiannessError("big-endian PFM (positive scale) is not supported")

    payload = data[offset:]
    expected = width * height * channels * FLOAT_SIZE
    if len(payload) != expected:
        other = 4 - channels  # 1 <-> 3
        if len(payload) == width * height * other * FLOAT_SIZE:
            raise PFMChannelError(f"{tag.decode()} header with {other}-channel payload")
        if len(payload) < expected:
            raise PFMTruncatedError(f"payload has {len(payload)} bytes, expected {expected}")
        raise PFMHeaderError(f"{len(payload) - expected} trailing bytes after the payload")

    pixels = np.frombuffer(payload, dtype="<f4").astype(np.float32)
    shape = (height, width) if channels == 1 else (height, width, 3)
    return np.flipud(pixels.reshape(shape)).copy()


def write_pfm(path: PathLike, image: np.ndarray) -> Path:
    path = Path(path)
    path.write_bytes(encode_pfm(image))
    logger.debug("pfm.write", path=str(path), shape=list(np.shape(image)))
    return path


def read_pfm(path: PathLike) -> np.ndarray:
    path = Path(path)
    image = decode_pfm(path.read_bytes())
    logger.debug("pfm.read", path=str(path), shape=list(image.shape))
    return image


__all__ = ["read_pfm", "write_pfm", "encode_pfm", "decode_pfm"]
