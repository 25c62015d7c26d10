"""Disney-style BSDF and direct-light rendering of material maps.

The lobe code is written once against plain numpy arrays and ``Dual`` values,
so the estimator and the gradient checker differentiate exactly the formulas
used for rendering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

from staged_pbr.core import dual
from staged_pbr.core.dual import Number
from staged_pbr.core.lighting import LightRig
from staged_pbr.core.materials import MaterialMaps, validate_maps
from staged_pbr.monitoring.logging import get_logger
from staged_pbr.utils.exceptions import MaterialValidationError, ParameterError
from staged_pbr.utils.parallel import map_chunks

logger = get_logger(__name__)

ALPHA_MIN = 1e-4
F0_SCALE = 0.08
COSINE_FLOOR = 1e-8
UNIT_INPUT_TOLERANCE = 1e-3
RENDER_CHUNK = 4096
VIEW = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class CameraModel:
    """Orthographic camera looking down -Z; the view direction is +Z everywhere."""

    extent_x: float = 2.0
    extent_y: float = 2.0
    z_range: float = 0.5
    mode: str = "orthographic"

    def __post_init__(self) -> None:
        if self.mode != "orthographic":
            raise ParameterError(f"unsupported camera mode {self.mode!r}")
        for name in ("extent_x", "extent_y", "z_range"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"camera {name} must be positive, got {getattr(self, name)}")

    @classmethod
    def from_config(cls, config: Any) -> "CameraModel":
        section = config.camera
        return cls(
            extent_x=float(section.extent_x),
            extent_y=float(section.extent_y),
            z_range=float(section.z_range),
        )


@dataclass
class PixelMaterial:
    n: np.ndarray
    d: np.ndarray
    r: float
    s: float
    sss: float
    p: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        self.n = np.asarray(self.n, dtype=np.float64)
        self.d = np.asarray(self.d, dtype=np.float64)
        self.p = np.asarray(self.p, dtype=np.float64)
        if abs(np.linalg.norm(self.n) - 1.0) > 1e-6:
            raise ParameterError(f"pixel normal {self.n} is not unit length")
        values = np.concatenate([self.d, [self.r, self.s, self.sss]])
        if np.any(values < 0.0) or np.any(values > 1.0) or not np.all(np.isfinite(values)):
            raise ParameterError("pixel material values must lie in [0, 1]")


def reconstruct_position(u: int, v: int, disp: float, cam: CameraModel, width: int, height: int) -> np.ndarray:
    """Camera-space point of pixel (u, v); larger displacement is nearer the camera."""
    if not (0 <= u < width and 0 <= v < height):
        raise ParameterError(f"pixel ({u}, {v}) outside a {width}x{height} image")
    if not 0.0 <= disp <= 1.0:
        raise ParameterError(f"displacement {disp} outside [0, 1]")
    x = ((u + 0.5) / width * 2.0 - 1.0) * cam.extent_x / 2.0
    y = (1.0 - (v + 0.5) / height * 2.0) * cam.extent_y / 2.0
    z = (disp - 0.5) * cam.z_range
    return np.array([x, y, z])


def position_map(displacement: np.ndarray, cam: CameraModel) -> np.ndarray:
    """reconstruct_position for every pixel of a displacement map, shape (H, W, 3)."""
    height, width = displacement.shape
    x = ((np.arange(width) + 0.5) / width * 2.0 - 1.0) * cam.extent_x / 2.0
    y = (1.0 - (np.arange(height) + 0.5) / height * 2.0) * cam.extent_y / 2.0
    xx, yy = np.meshgrid(x, y)
    return np.stack([xx, yy, (displacement - 0.5) * cam.z_range], axis=-1)


def _dot(n: tuple[Number, Number, Number], w: np.ndarray) -> Number:
    return n[0] * w[..., 0] + n[1] * w[..., 1] + n[2] * w[..., 2]


def bsdf_lobes(
    n: tuple[Number, Number, Number],
    r: Number,
    s: Number,
    sss: Number,
    wi: np.ndarray,
    wo: np.ndarray,
) -> tuple[Number, Number, Number]:
    """Diffuse factor, specular term and clamped cosine n·wi for direction pairs.

    The BSDF per colour channel is d * diffuse_factor + specular. All three
    outputs are zero where n·wi <= 0 or n·wo <= 0.
    """
    half = wi + wo
    half = half / np.maximum(np.linalg.norm(half, axis=-1, keepdims=True), 1e-12)
    h_dot_i = np.sum(half * wi, axis=-1)
    h_dot_o = np.sum(half * wo, axis=-1)

    cos_i = _dot(n, wi)
    cos_o = _dot(n, wo)
    cos_h = _dot(n, half)
    visible = (dual.value_of(cos_i) > 0.0) & (dual.value_of(cos_o) > 0.0)
    ci = dual.clamp_min(cos_i, COSINE_FLOOR)
    co = dual.clamp_min(cos_o, COSINE_FLOOR)

    alpha = dual.clamp_min(r * r, ALPHA_MIN)
    a2 = alpha * alpha

    # GGX distribution with Smith masking
    distribution = a2 / (math.pi * (cos_h * cos_h * (a2 - 1.0) + 1.0) ** 2)

    def smith_g1(c: Number) -> Number:
        return 2.0 * c / (c + dual.sqrt(a2 + (1.0 - a2) * c * c))

    f0 = F0_SCALE * s
    fresnel = f0 + (1.0 - f0) * (1.0 - h_dot_o) ** 5
    specular = distribution * fresnel * smith_g1(ci) * smith_g1(co) / (4.0 * ci * co)

    weight_i = (1.0 - ci) ** 5
    weight_o = (1.0 - co) ** 5
    fd90 = 0.5 + 2.0 * r * h_dot_i**2
    burley = (1.0 + (fd90 - 1.0) * weight_i) * (1.0 + (fd90 - 1.0) * weight_o)
    fss90 = r * h_dot_i**2
    fss = (1.0 + (fss90 - 1.0) * weight_i) * (1.0 + (fss90 - 1.0) * weight_o)
    subsurface = 1.25 * (fss * (1.0 / (ci + co) - 0.5) + 0.5)
    diffuse_factor = ((1.0 - sss) * burley + sss * subsurface) / math.pi

    return (
        dual.where(visible, diffuse_factor, 0.0),
        dual.where(visible, specular, 0.0),
        dual.where(visible, ci, 0.0),
    )


def shade_lights(
    n: tuple[Number, Number, Number],
    d: Number,
    r: Number,
    s: Number,
    sss: Number,
    directions: np.ndarray,
    intensities: np.ndarray,
) -> Number:
    """Radiance of N pixels under each of L lights, shape (N, L, 3).

    n holds three (N,) components, d is (N, 3) and r, s, sss are (N,).
    """
    column = tuple(c[:, None] for c in n)
    diffuse_factor, specular, cosine = bsdf_lobes(
        column, r[:, None], s[:, None], sss[:, None], directions[None, :, :], VIEW
    )
    reflectance = dual.expand_last(diffuse_factor) * d[:, None, :] + dual.expand_last(specular)
    return reflectance * dual.expand_last(cosine) * intensities[None, :, :]


def _check_unit(w: np.ndarray, name: str) -> None:
    if abs(np.linalg.norm(w) - 1.0) > UNIT_INPUT_TOLERANCE:
        raise ParameterError(f"{name} {w} is not unit length")


def eval_bsdf(m: PixelMaterial, wi: Sequence[float], wo: Sequence[float]) -> np.ndarray:
    wi = np.asarray(wi, dtype=np.float64)
    wo = np.asarray(wo, dtype=np.float64)
    _check_unit(wi, "wi")
    _check_unit(wo, "wo")
    n = (m.n[0], m.n[1], m.n[2])
    diffuse_factor, specular, _ = bsdf_lobes(n, m.r, m.s, m.sss, wi, wo)
    return m.d * diffuse_factor + specular


def _column(x: float) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=np.float64))


def shade_pixel(m: PixelMaterial, rig: LightRig) -> np.ndarray:
    """Direct radiance toward the camera: Σ intensity · BSDF · max(0, n·wi)."""
    if len(rig) == 0:
        return np.zeros(3)
    radiance = shade_lights(
        (m.n[0:1], m.n[1:2], m.n[2:3]),
        m.d[None, :],
        _column(m.r),
        _column(m.s),
        _column(m.sss),
        rig.directions(),
        rig.intensities(),
    )
    return radiance[0].sum(axis=0)


@dataclass
class PixelBuffers:
    """Masked pixels of a MaterialMaps flattened in row-major order."""

    index: tuple[np.ndarray, np.ndarray]
    normal: np.ndarray
    diffuse: np.ndarray
    roughness: np.ndarray
    specular: np.ndarray
    sss: np.ndarray

    @classmethod
    def from_maps(cls, maps: MaterialMaps) -> "PixelBuffers":
        index = np.nonzero(maps.mask)
        return cls(
            index=index,
            normal=maps.decoded_normals()[index],
            diffuse=maps.diffuse[index],
            roughness=maps.roughness[index],
            specular=maps.specular[index],
            sss=maps.sss[index],
        )

    def __len__(self) -> int:
        return int(self.roughness.shape[0])

    def shade(self, start: int, stop: int, rig: LightRig) -> np.ndarray:
        sl = slice(start, stop)
        n = self.normal[sl]
        return shade_lights(
            (n[:, 0], n[:, 1], n[:, 2]),
            self.diffuse[sl],
            self.roughness[sl],
            self.specular[sl],
            self.sss[sl],
            rig.directions(),
            rig.intensities(),
        )


def render_lights(maps: MaterialMaps, rig: LightRig, *, threads: int = 1, chunk_size: int = RENDER_CHUNK) -> np.ndarray:
    """One image per light, shape (L, H, W, 3); maps are assumed valid."""
    out = np.zeros((len(rig), maps.height, maps.width, 3))
    if len(rig) == 0 or maps.masked_count == 0:
        return out
    pixels = PixelBuffers.from_maps(maps)
    chunks = map_chunks(lambda a, b: pixels.shade(a, b, rig), len(pixels), chunk_size, threads)
    per_pixel = np.concatenate(chunks, axis=0)
    out[(slice(None),) + pixels.index] = per_pixel.transpose(1, 0, 2)
    return out


def render_image(
    maps: MaterialMaps,
    rig: LightRig,
    cam: Optional[CameraModel] = None,
    *,
    threads: int = 1,
) -> np.ndarray:
    """Render maps under every light of the rig, shape (H, W, 3)."""
    violations = validate_maps(maps)
    if violations:
        raise MaterialValidationError(violations)
    image = render_lights(maps, rig, threads=threads).sum(axis=0)
    logger.debug("shader.render", width=maps.width, height=maps.height, lights=len(rig), pixels=maps.masked_count)
    return image


def to_srgb8(img: np.ndarray, exposure: float = 1.0) -> np.ndarray:
    """Clamp, apply the sRGB transfer curve and quantise to uint8."""
    if not exposure > 0:
        raise ParameterError(f"exposure must be positive, got {exposure}")
    v = np.clip(np.asarray(img, dtype=np.float64) * exposure, 0.0, 1.0)
    encoded = np.where(v <= 0.0031308, 12.92 * v, 1.055 * np.power(v, 1.0 / 2.4) - 0.055)
    return np.floor(encoded * 255.0 + 0.5).astype(np.uint8)


__all__ = [
    "CameraModel",
    "PixelMaterial",
    "PixelBuffers",
    "reconstruct_position",
    "position_map",
    "bsdf_lobes",
    "shade_lights",
    "eval_bsdf",
    "shade_pixel",
    "render_lights",
    "render_image",
    "to_srgb8",
]
