"""8-bit PNG previews of radiance images and material maps."""

from __future__ import annotations

from pathlib import Path
from typing import Union

import imageio.v3 as iio
import numpy as np

from staged_pbr.core.shader import to_srgb8
from staged_pbr.monitoring.logging import get_logger
from staged_pbr.utils.exceptions import DimensionError

logger = get_logger(__name__)


def write_png_preview(path: Union[str, Path], img: np.ndarray, exposure: float = 1.0) -> Path:
    """Tone map with the sRGB transfer and write an RGB PNG.

    Gray (H, W) inputs are replicated to three channels.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        img = np.repeat(img[..., None], 3, axis=-1)
    if img.ndim != 3 or img.shape[2] != 3:
        raise DimensionError(f"preview needs an HxW or HxWx3 image, got {img.shape}")
    rgb8 = to_srgb8(img, exposure)
    path = Path(path)
    iio.imwrite(path, rgb8, extension=".png")
    logger.debug("png.write", path=str(path), exposure=exposure)
    return path


__all__ = ["write_png_preview"]
