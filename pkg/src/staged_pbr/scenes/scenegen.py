"""Deterministic synthetic ground-truth scenes and their multi-light observations."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Any, Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from staged_pbr.core.lighting import DEFAULT_FIXED_INTENSITY, build_fixed_rig
from staged_pbr.core.materials import (
    CATEGORY_TABLE,
    UNLABELED,
    MaterialCategory,
    MaterialMaps,
    RegionLabels,
    encode_normals,
    validate_maps,
)
from staged_pbr.core.shader import CameraModel, render_lights
from staged_pbr.core.streams import PURPOSE_OBSERVATION_NOISE, stream
from staged_pbr.estimation.estimator import ObservationSet
from staged_pbr.monitoring.logging import get_logger
from staged_pbr.utils.exceptions import MaterialValidationError, ParameterError

logger = get_logger(__name__)

MIN_SIZE = 16
BUMP_COUNT = 3
BUMP_SCALE = 0.35
DISPLACEMENT_RANGE = (0.05, 0.95)
DIFFUSE_RANGE = (0.05, 0.95)
BASE_COLOR_RANGE = (0.2, 0.8)
NOISE_STRENGTH = 0.15


@dataclass(frozen=True)
class SceneSpec:
    seed: int
    width: int = 64
    height: int = 64
    num_regions: int = 6
    categories: Optional[tuple[MaterialCategory, ...]] = None
    boundary_blur: int = 1

    def __post_init__(self) -> None:
        if self.seed < 0:
            raise ParameterError(f"seed must be non-negative, got {self.seed}")
        if self.width < MIN_SIZE or self.height < MIN_SIZE:
            raise ParameterError(f"scenes must be at least {MIN_SIZE}x{MIN_SIZE}, got {self.width}x{self.height}")
        if self.num_regions < 1:
            raise ParameterError(f"num_regions must be >= 1, got {self.num_regions}")
        if self.boundary_blur < 0:
            raise ParameterError(f"boundary_blur must be >= 0, got {self.boundary_blur}")
        if self.categories is not None:
            cats = tuple(MaterialCategory(c) for c in self.categories)
            if not cats:
                raise ParameterError("categories must not be empty")
            object.__setattr__(self, "categories", cats)

    @property
    def allowed(self) -> tuple[MaterialCategory, ...]:
        return self.categories if self.categories is not None else tuple(MaterialCategory)

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["categories"] = None if self.categories is None else [c.name.title() for c in self.categories]
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SceneSpec":
        data = dict(data)
        if data.get("categories") is not None:
            data["categories"] = tuple(MaterialCategory.parse(str(c)) for c in data["categories"])
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ParameterError(f"unknown scene keys: {sorted(unknown)}")
        return cls(**data)


def _ellipse_mask(width: int, height: int) -> np.ndarray:
    u = (np.arange(width) + 0.5 - width / 2.0) / (width / 2.0)
    v = (np.arange(height) + 0.5 - height / 2.0) / (height / 2.0)
    return (u[None, :] ** 2 + v[:, None] ** 2) <= 1.0


def _world_grid(width: int, height: int, cam: CameraModel) -> tuple[np.ndarray, np.ndarray]:
    x = ((np.arange(width) + 0.5) / width * 2.0 - 1.0) * cam.extent_x / 2.0
    y = (1.0 - (np.arange(height) + 0.5) / height * 2.0) * cam.extent_y / 2.0
    return np.meshgrid(x, y)


def _height_field(spec: SceneSpec, cam: CameraModel) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Displacement and its analytic world-space slopes dz/dx, dz/dy."""
    xx, yy = _world_grid(spec.width, spec.height, cam)
    bumps = np.zeros_like(xx)
    d_dx = np.zeros_like(xx)
    d_dy = np.zeros_like(xx)
    half = min(cam.extent_x, cam.extent_y) / 2.0
    for k in range(BUMP_COUNT):
        rng = stream(spec.seed, "bumps", k)
        cx = rng.uniform(-0.6, 0.6) * cam.extent_x / 2.0
        cy = rng.uniform(-0.6, 0.6) * cam.extent_y / 2.0
        sigma = rng.uniform(0.2, 0.45) * half
        amplitude = rng.uniform(-1.0 / 3.0, 1.0 / 3.0)
        g = amplitude * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2.0 * sigma**2))
        bumps += g
        d_dx += -g * (xx - cx) / sigma**2
        d_dy += -g * (yy - cy) / sigma**2

    raw = 0.5 + BUMP_SCALE * bumps
    disp = np.clip(raw, *DISPLACEMENT_RANGE)
    flat = raw != disp
    # z = (disp - 0.5) * z_range
    scale = BUMP_SCALE * cam.z_range
    dz_dx = np.where(flat, 0.0, scale * d_dx)
    dz_dy = np.where(flat, 0.0, scale * d_dy)
    return disp, dz_dx, dz_dy


def height_field_normals(dz_dx: np.ndarray, dz_dy: np.ndarray) -> np.ndarray:
    """Unit normals (−∂z/∂x, −∂z/∂y, 1) normalised, shape (H, W, 3)."""
    n = np.stack([-dz_dx, -dz_dy, np.ones_like(dz_dx)], axis=-1)
    return n / np.linalg.norm(n, axis=-1, keepdims=True)


def _region_sites(spec: SceneSpec) -> np.ndarray:
    """Site centres in pixel coordinates (u, v), placed well inside the ellipse."""
    rng = stream(spec.seed, "region_sites", 0)
    radius = 0.85 * np.sqrt(rng.random(spec.num_regions))
    angle = 2.0 * math.pi * rng.random(spec.num_regions)
    u = spec.width / 2.0 * (1.0 + radius * np.cos(angle))
    v = spec.height / 2.0 * (1.0 + radius * np.sin(angle))
    return np.stack([u, v], axis=-1)


def _nearest_site(spec: SceneSpec, sites: np.ndarray) -> np.ndarray:
    uu, vv = np.meshgrid(np.arange(spec.width) + 0.5, np.arange(spec.height) + 0.5)
    distance = (uu[..., None] - sites[:, 0]) ** 2 + (vv[..., None] - sites[:, 1]) ** 2
    return np.argmin(distance, axis=-1)


def box_blur(image: np.ndarray, radius: int) -> np.ndarray:
    """Mean over a (2r+1)² window with edge padding; radius 0 is the identity."""
    if radius <= 0:
        return image.copy()
    pad = [(radius, radius), (radius, radius)] + [(0, 0)] * (image.ndim - 2)
    padded = np.pad(image, pad, mode="edge")
    windows = sliding_window_view(padded, (2 * radius + 1, 2 * radius + 1), axis=(0, 1))
    return windows.mean(axis=(-2, -1))


def _low_frequency_noise(spec: SceneSpec, xx: np.ndarray, yy: np.ndarray) -> np.ndarray:
    """Three-channel sum of seeded sinusoids, values in [-1, 1]."""
    rng = stream(spec.seed, "diffuse_noise", 0)
    noise = np.zeros(xx.shape + (3,))
    waves = 3
    for channel in range(3):
        for _ in range(waves):
            fx, fy = rng.uniform(-1.0, 1.0, 2)
            phase = rng.uniform(0.0, 2.0 * math.pi)
            noise[..., channel] += np.sin(math.pi * (fx * xx + fy * yy) + phase) / waves
    return noise


def generate_scene(spec: SceneSpec, cam: Optional[CameraModel] = None) -> tuple[MaterialMaps, RegionLabels]:
    """Build ground-truth maps and region labels for a scene description."""
    cam = cam or CameraModel()
    mask = _ellipse_mask(spec.width, spec.height)
    m3 = mask[..., None]

    disp, dz_dx, dz_dy = _height_field(spec, cam)
    normals = height_field_normals(dz_dx, dz_dy)

    sites = _region_sites(spec)
    owner = _nearest_site(spec, sites)
    allowed = spec.allowed
    site_category = np.array([int(allowed[i % len(allowed)]) for i in range(spec.num_regions)])
    category = site_category[owner]

    table = np.array(
        [[CATEGORY_TABLE[c].roughness, CATEGORY_TABLE[c].specular, CATEGORY_TABLE[c].sss] for c in MaterialCategory]
    )
    rss = box_blur(table[category], spec.boundary_blur)

    colors = np.array(
        [stream(spec.seed, "region_color", i).uniform(*BASE_COLOR_RANGE, 3) for i in range(spec.num_regions)]
    )
    xx, yy = _world_grid(spec.width, spec.height, cam)
    noise = _low_frequency_noise(spec, xx / (cam.extent_x / 2.0), yy / (cam.extent_y / 2.0))
    diffuse = np.clip(colors[owner] * (1.0 + NOISE_STRENGTH * noise), *DIFFUSE_RANGE)

    maps = MaterialMaps(
        width=spec.width,
        height=spec.height,
        normal=np.where(m3, encode_normals(normals), 0.0),
        diffuse=np.where(m3, diffuse, 0.0),
        roughness=np.where(mask, rss[..., 0], 0.0),
        specular=np.where(mask, rss[..., 1], 0.0),
        sss=np.where(mask, rss[..., 2], 0.0),
        displacement=np.where(mask, disp, 0.0),
        mask=mask,
    )
    labels = RegionLabels(spec.width, spec.height, np.where(mask, category, UNLABELED))
    logger.info(
        "scene.generated",
        seed=spec.seed,
        width=spec.width,
        height=spec.height,
        regions=spec.num_regions,
        categories=[MaterialCategory(c).name.title() for c in sorted(set(site_category.tolist()))],
        pixels=maps.masked_count,
    )
    return maps, labels


def render_observations(
    scene: MaterialMaps,
    cam: Optional[CameraModel] = None,
    noise_sigma: float = 0.0,
    seed: int = 0,
    *,
    fixed_intensity: float = DEFAULT_FIXED_INTENSITY,
    threads: int = 1,
) -> ObservationSet:
    """One image per fixed-rig light, with optional per-pixel Gaussian noise."""
    if noise_sigma < 0:
        raise ParameterError(f"noise_sigma must be >= 0, got {noise_sigma}")
    violations = validate_maps(scene)
    if violations:
        raise MaterialValidationError(violations)

    rig = build_fixed_rig(fixed_intensity)
    images = render_lights(scene, rig, threads=threads)
    if noise_sigma > 0:
        m3 = scene.mask[..., None]
        for i in range(len(rig)):
            noise = stream(seed, PURPOSE_OBSERVATION_NOISE, i).standard_normal(images.shape[1:]) * noise_sigma
            images[i] = np.where(m3, np.maximum(images[i] + noise, 0.0), images[i])
    logger.info("scene.observations", lights=len(rig), noise_sigma=noise_sigma)
    return ObservationSet(lights=rig, images=images, mask=scene.mask.copy())


__all__ = [
    "SceneSpec",
    "generate_scene",
    "render_observations",
    "height_field_normals",
    "box_blur",
]
