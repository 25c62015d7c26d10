"""Light rigs: the fixed 36-light arc set, the random hemisphere light, and
directional-light approximations of lat-long environment maps."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from staged_pbr.core.streams import PURPOSE_RANDOM_LIGHT, uniforms
from staged_pbr.monitoring.logging import get_logger
from staged_pbr.utils.exceptions import ParameterError

logger = get_logger(__name__)

FIXED_RIG_STEP_DEG = 10
FIXED_RIG_SIZE = 36
DEFAULT_FIXED_INTENSITY = 5.0
RANDOM_INTENSITY_RANGE = (3.0, 8.0)
UNIT_TOLERANCE = 1e-9
DISTINCT_ANGLE = 1e-6


@dataclass(frozen=True)
class DirectionalLight:
    """Distant light; direction points from the surface toward the light."""

    direction: tuple[float, float, float]
    intensity: tuple[float, float, float]

    def __post_init__(self) -> None:
        norm = math.sqrt(sum(c * c for c in self.direction))
        if abs(norm - 1.0) > UNIT_TOLERANCE:
            raise ParameterError(f"light direction {self.direction} is not unit length (norm {norm:.12g})")
        if any(c < 0.0 or not math.isfinite(c) for c in self.intensity):
            raise ParameterError(f"light intensity {self.intensity} must be finite and non-negative")

    @classmethod
    def create(cls, direction: Sequence[float], intensity: float | Sequence[float]) -> "DirectionalLight":
        """Normalise the direction and broadcast a grayscale intensity."""
        d = np.asarray(direction, dtype=np.float64)
        d = d / np.linalg.norm(d)
        rgb = np.broadcast_to(np.asarray(intensity, dtype=np.float64), (3,))
        return cls(
            direction=(float(d[0]), float(d[1]), float(d[2])),
            intensity=(float(rgb[0]), float(rgb[1]), float(rgb[2])),
        )

    def scaled(self, factor: float) -> "DirectionalLight":
        return DirectionalLight(self.direction, tuple(c * factor for c in self.intensity))  # type: ignore[arg-type]


class LightRig(Sequence[DirectionalLight]):
    """Immutable ordered collection of directional lights."""

    def __init__(self, lights: Iterable[DirectionalLight]) -> None:
        self._lights: tuple[DirectionalLight, ...] = tuple(lights)
        if len(self._lights) > 1:
            dirs = self.directions()
            cosines = np.clip(dirs @ dirs.T, -1.0, 1.0)
            np.fill_diagonal(cosines, -1.0)
            if np.any(np.arccos(cosines.max(axis=1)) <= DISTINCT_ANGLE):
                raise ParameterError("rig lights must have pairwise distinct directions")

    def __getitem__(self, index):  # type: ignore[override]
        if isinstance(index, slice):
            return LightRig(self._lights[index])
        return self._lights[index]

    def __len__(self) -> int:
        return len(self._lights)

    def __iter__(self) -> Iterator[DirectionalLight]:
        return iter(self._lights)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, LightRig) and self._lights == other._lights

    def __hash__(self) -> int:
        return hash(self._lights)

    def __add__(self, other: "LightRig") -> "LightRig":
        return LightRig(self._lights + tuple(other))

    def __repr__(self) -> str:
        return f"LightRig({len(self._lights)} lights)"

    def directions(self) -> np.ndarray:
        return np.array([light.direction for light in self._lights], dtype=np.float64).reshape(-1, 3)

    def intensities(self) -> np.ndarray:
        return np.array([light.intensity for light in self._lights], dtype=np.float64).reshape(-1, 3)

    def scaled(self, factor: float) -> "LightRig":
        return LightRig(light.scaled(factor) for light in self._lights)


@dataclass
class EnvironmentMap:
    """Equirectangular radiance image, rows from the +Z pole downward."""

    radiance: np.ndarray

    def __post_init__(self) -> None:
        if self.radiance.ndim != 3 or self.radiance.shape[2] != 3:
            raise ParameterError(f"environment map must be HxWx3, got {self.radiance.shape}")
        if self.width != 2 * self.height:
            raise ParameterError(f"environment map width must be twice its height, got {self.width}x{self.height}")
        if not np.all(np.isfinite(self.radiance)) or np.any(self.radiance < 0.0):
            raise ParameterError("environment map radiance must be finite and non-negative")

    @property
    def height(self) -> int:
        return int(self.radiance.shape[0])

    @property
    def width(self) -> int:
        return int(self.radiance.shape[1])

    def texel_directions(self) -> np.ndarray:
        """Unit vector at every texel centre, shape (H, W, 3)."""
        theta = math.pi * (np.arange(self.height) + 0.5) / self.height
        phi = 2.0 * math.pi * (np.arange(self.width) + 0.5) / self.width
        sin_t = np.sin(theta)[:, None]
        return np.stack(
            [sin_t * np.cos(phi)[None, :], sin_t * np.sin(phi)[None, :], np.broadcast_to(np.cos(theta)[:, None], (self.height, self.width))],
            axis=-1,
        )

    def texel_solid_angles(self) -> np.ndarray:
        """Exact solid angle of every texel, shape (H, W); sums to 4π."""
        edges = math.pi * np.arange(self.height + 1) / self.height
        band = np.cos(edges[:-1]) - np.cos(edges[1:])
        return np.broadcast_to((2.0 * math.pi / self.width) * band[:, None], (self.height, self.width)).copy()


def build_fixed_rig(intensity: float = DEFAULT_FIXED_INTENSITY) -> LightRig:
    """Lights every 10° on the XOZ and YOZ arcs, zenith excluded: 18 + 18."""
    if intensity <= 0:
        raise ParameterError(f"fixed rig intensity must be positive, got {intensity}")
    angles = [a for a in range(0, 181, FIXED_RIG_STEP_DEG) if a != 90]
    lights: list[DirectionalLight] = []
    for plane in ("xoz", "yoz"):
        for degrees in angles:
            theta = math.radians(degrees)
            c, s = math.cos(theta), math.sin(theta)
            direction = (c, 0.0, s) if plane == "xoz" else (0.0, c, s)
            lights.append(DirectionalLight.create(direction, intensity))
    return LightRig(lights)


def sample_random_light(
    seed: int,
    counter: int,
    intensity_range: tuple[float, float] = RANDOM_INTENSITY_RANGE,
) -> DirectionalLight:
    """Uniform upper-hemisphere direction with a grayscale intensity in the range."""
    u1, u2, u3 = uniforms(seed, PURPOSE_RANDOM_LIGHT, counter, 3)
    z = u1
    phi = 2.0 * math.pi * u2
    radial = math.sqrt(max(0.0, 1.0 - z * z))
    low, high = intensity_range
    return DirectionalLight.create((radial * math.cos(phi), radial * math.sin(phi), z), low + (high - low) * u3)


def build_training_rig(seed: int, step: int, fixed_intensity: float = DEFAULT_FIXED_INTENSITY) -> LightRig:
    """The 36 fixed lights followed by the random light for this step."""
    return build_fixed_rig(fixed_intensity) + LightRig([sample_random_light(seed, step)])


def _band_allocation(weights: np.ndarray, total: int, caps: np.ndarray) -> np.ndarray:
    """One light per band, the rest by largest remainder on band weight, capped."""
    counts = np.ones(len(weights), dtype=np.int64)
    remaining = total - len(weights)
    while remaining > 0:
        room = caps - counts
        open_bands = room > 0
        share = np.where(open_bands, weights, 0.0)
        ideal = share / share.sum() * remaining
        extra = np.minimum(np.floor(ideal).astype(np.int64), room)
        if extra.sum() == 0:
            # hand single lights out by remainder, largest first
            order = np.lexsort((np.arange(len(weights)), -(ideal - np.floor(ideal))))
            for band in order:
                if remaining == 0:
                    break
                if open_bands[band]:
                    extra[band] = 1
                    remaining -= 1
            counts += extra
            continue
        counts += extra
        remaining -= int(extra.sum())
    return counts


def envmap_to_lights(env: EnvironmentMap, k: int) -> LightRig:
    """Collapse an environment map to k directional lights, conserving power.

    Texels are grouped into latitude bands (contiguous texel rows), each band
    split into contiguous longitude sectors; every group becomes one light at
    its solid-angle-weighted mean direction carrying Σ radiance·solid angle.
    """
    texels = env.width * env.height
    if k < 1 or k > texels:
        raise ParameterError(f"light count must be in [1, {texels}], got {k}")

    bands = max(1, min(env.height, k, int(round(math.sqrt(k / 2.0)))))
    while env.width * bands < k:
        bands += 1
    row_groups = np.array_split(np.arange(env.height), bands)

    omega = env.texel_solid_angles()
    directions = env.texel_directions()
    band_weights = np.array([omega[rows].sum() for rows in row_groups])
    counts = _band_allocation(band_weights, k, np.full(bands, env.width))

    lights: list[DirectionalLight] = []
    for rows, sectors in zip(row_groups, counts):
        for cols in np.array_split(np.arange(env.width), int(sectors)):
            w = omega[np.ix_(rows, cols)]
            power = (env.radiance[np.ix_(rows, cols)] * w[..., None]).sum(axis=(0, 1))
            mean_dir = (directions[np.ix_(rows, cols)] * w[..., None]).sum(axis=(0, 1))
            norm = np.linalg.norm(mean_dir)
            if norm < 1e-9:
                mean_dir, norm = np.array([0.0, 0.0, 1.0]), 1.0
            lights.append(DirectionalLight.create(mean_dir / norm, power))

    logger.debug("lighting.envmap_to_lights", texels=texels, lights=len(lights), bands=bands)
    return LightRig(lights)


def format_rig(rig: LightRig) -> str:
    """One line per light: 'dx dy dz ir ig ib' with 9 significant digits."""
    lines = []
    for light in rig:
        values = light.direction + light.intensity
        lines.append(" ".join(f"{v:.9g}" for v in values))
    return "\n".join(lines) + ("\n" if lines else "")


def parse_rig(text: str) -> LightRig:
    lights = []
    for number, line in enumerate(text.splitlines(), start=1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 6:
            raise ParameterError(f"rig line {number}: expected 6 numbers, got {len(fields)}")
        try:
            values = [float(f) for f in fields]
        except ValueError as exc:
            raise ParameterError(f"rig line {number}: {exc}") from exc
        lights.append(DirectionalLight.create(values[:3], values[3:]))
    return LightRig(lights)


__all__ = [
    "DirectionalLight",
    "LightRig",
    "EnvironmentMap",
    "DEFAULT_FIXED_INTENSITY",
    "FIXED_RIG_SIZE",
    "build_fixed_rig",
    "sample_random_light",
    "build_training_rig",
    "envmap_to_lights",
    "format_rig",
    "parse_rig",
]
