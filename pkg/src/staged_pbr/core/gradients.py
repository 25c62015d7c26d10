"""Per-pixel radiance partials in unconstrained parameter space.

Nine scalars describe a pixel: the tangent components (nx, ny) of its
normal, and logits of displacement, the three diffuse components,
roughness, specular and subsurface weight.
"""

from __future__ import annotations

from dataclasses import astuple, dataclass
from typing import Iterable, Mapping, Optional

import numpy as np

from staged_pbr.core import dual
from staged_pbr.core.dual import Dual, Number
from staged_pbr.core.lighting import LightRig, sample_random_light
from staged_pbr.core.shader import PixelMaterial, shade_lights
from staged_pbr.core.streams import stream
from staged_pbr.utils.exceptions import ParameterError

NZ_EPSILON = 1e-6
SQUASH_CLIP = 1e-4
FD_FLOOR = 1e-6

# parameter slots owned by each material channel
CHANNEL_SLOTS: Mapping[str, tuple[int, ...]] = {
    "normal": (0, 1),
    "displacement": (2,),
    "diffuse": (3, 4, 5),
    "roughness": (6,),
    "specular": (7,),
    "sss": (8,),
}


def logit(values: np.ndarray) -> np.ndarray:
    v = np.clip(np.asarray(values, dtype=np.float64), SQUASH_CLIP, 1.0 - SQUASH_CLIP)
    return np.log(v / (1.0 - v))


def complete_normal(nx: Number, ny: Number) -> tuple[Number, Number, Number]:
    """Unit normal from tangent components, always facing the camera."""
    nz = dual.sqrt(dual.clamp_min(1.0 - nx * nx - ny * ny, NZ_EPSILON))
    norm = dual.sqrt(nx * nx + ny * ny + nz * nz)
    return (nx / norm, ny / norm, nz / norm)


def slots_for(channels: Iterable[str]) -> list[int]:
    return sorted(slot for name in channels for slot in CHANNEL_SLOTS[name])


def encode_params(
    normal: np.ndarray,
    diffuse: np.ndarray,
    roughness: np.ndarray,
    specular: np.ndarray,
    sss: np.ndarray,
    displacement: np.ndarray,
) -> np.ndarray:
    """Stack decoded per-pixel channels (unit normals) into (N, 9) parameters."""
    t = np.empty(np.shape(roughness) + (9,))
    t[..., 0] = normal[..., 0]
    t[..., 1] = normal[..., 1]
    t[..., 2] = logit(displacement)
    t[..., 3:6] = logit(diffuse)
    t[..., 6] = logit(roughness)
    t[..., 7] = logit(specular)
    t[..., 8] = logit(sss)
    return t


def build_channels(
    t: np.ndarray,
    optimized: Iterable[str] = (),
    current: Optional[Mapping[str, np.ndarray]] = None,
) -> dict[str, Number]:
    """Decode (N, 9) parameters into shader inputs.

    Channels listed in ``optimized`` come back as duals; the rest are plain
    arrays. The partials axis holds the optimized slots only, in the order of
    ``slots_for(optimized)``. When ``current`` is given its exact values are
    used instead of the decoded ones, so untouched pixels keep their stored
    values bit for bit.
    """
    optimized = set(optimized)
    seeded = {slot: k for k, slot in enumerate(slots_for(optimized))}
    channels: dict[str, Number] = {}

    def seed(slot: int, name: str) -> Number:
        column = t[:, slot]
        return Dual.variable(column, seeded[slot], len(seeded)) if name in optimized else column

    channels["normal"] = dual.stack_last(list(complete_normal(seed(0, "normal"), seed(1, "normal"))))
    channels["displacement"] = dual.logistic(seed(2, "displacement"))
    channels["diffuse"] = dual.stack_last([dual.logistic(seed(k, "diffuse")) for k in (3, 4, 5)])
    channels["roughness"] = dual.logistic(seed(6, "roughness"))
    channels["specular"] = dual.logistic(seed(7, "specular"))
    channels["sss"] = dual.logistic(seed(8, "sss"))

    if current is not None:
        for name, value in current.items():
            if isinstance(channels[name], Dual):
                channels[name] = channels[name].with_value(value)
            else:
                channels[name] = np.asarray(value, dtype=np.float64)
    return channels


def shade_channels(channels: Mapping[str, Number], rig: LightRig) -> Number:
    """Per-light radiance (N, L, 3) of decoded channels."""
    n = channels["normal"]
    return shade_lights(
        (n[:, 0], n[:, 1], n[:, 2]),
        channels["diffuse"],
        channels["roughness"],
        channels["specular"],
        channels["sss"],
        rig.directions(),
        rig.intensities(),
    )


@dataclass(frozen=True)
class PixelParams:
    """Unconstrained parameters of one pixel."""

    nx: float
    ny: float
    disp: float
    dr: float
    dg: float
    db: float
    r: float
    s: float
    sss: float

    @classmethod
    def from_vector(cls, vector: Iterable[float]) -> "PixelParams":
        return cls(*(float(v) for v in vector))

    @classmethod
    def from_material(cls, m: PixelMaterial, displacement: float = 0.5) -> "PixelParams":
        t = encode_params(
            m.n[None, :], m.d[None, :], np.array([m.r]), np.array([m.s]), np.array([m.sss]), np.array([displacement])
        )
        return cls.from_vector(t[0])

    def vector(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)

    def material(self) -> PixelMaterial:
        ch = build_channels(self.vector()[None, :])
        return PixelMaterial(
            n=ch["normal"][0],
            d=ch["diffuse"][0],
            r=float(ch["roughness"][0]),
            s=float(ch["specular"][0]),
            sss=float(ch["sss"][0]),
        )


def shade_batch(t: np.ndarray, rig: LightRig) -> np.ndarray:
    """Radiance summed over the rig for (N, 9) parameters, shape (N, 3)."""
    return shade_channels(build_channels(t), rig).sum(axis=1)


def shade_batch_with_partials(t: np.ndarray, rig: LightRig) -> tuple[np.ndarray, np.ndarray]:
    """Radiance (N, 3) and Jacobian (N, 3, 9) with respect to every slot."""
    radiance = dual.lift(shade_channels(build_channels(t, CHANNEL_SLOTS.keys()), rig)).sum(axis=1)
    return radiance.value, radiance.grad


def shade_pixel_with_partials(params: PixelParams, rig: LightRig) -> tuple[np.ndarray, np.ndarray]:
    value, jacobian = shade_batch_with_partials(params.vector()[None, :], rig)
    return value[0], jacobian[0]


def finite_difference_errors(t: np.ndarray, rig: LightRig, h: float = 1e-4) -> np.ndarray:
    """Max relative error of the analytic Jacobian per row of t, shape (N,)."""
    if not h > 0:
        raise ParameterError(f"step must be positive, got {h}")
    _, analytic = shade_batch_with_partials(t, rig)
    numeric = np.empty_like(analytic)
    for slot in range(dual.WIDTH):
        step = np.zeros(dual.WIDTH)
        step[slot] = h
        numeric[:, :, slot] = (shade_batch(t + step, rig) - shade_batch(t - step, rig)) / (2.0 * h)
    error = np.abs(numeric - analytic) / np.maximum(np.abs(analytic), FD_FLOOR)
    return error.reshape(len(t), -1).max(axis=1)


def finite_difference_check(params: PixelParams, rig: LightRig, h: float = 1e-4) -> float:
    """Central-difference oracle over the 27 Jacobian entries of one pixel."""
    return float(finite_difference_errors(params.vector()[None, :], rig, h)[0])


def random_configs(seed: int, count: int, lights: int = 3) -> tuple[np.ndarray, LightRig]:
    """Seeded pixel parameters away from the shading kinks, plus a small random rig.

    Normal tangent components stay within radius 0.6, roughness within
    [0.4, 0.95], and every config keeps n·wi >= 0.1 for all rig lights.
    """
    chosen = []
    counter = 0
    while len(chosen) < lights:
        light = sample_random_light(seed, counter)
        counter += 1
        # steep lights only, so every accepted normal can see all of them
        if light.direction[2] >= 0.5:
            chosen.append(light)
    rig = LightRig(chosen)
    rng = stream(seed, "gradient_configs", 0)
    directions = rig.directions()
    t = np.empty((count, dual.WIDTH))
    filled = 0
    while filled < count:
        batch = max(count - filled, 16) * 2
        radius = 0.6 * np.sqrt(rng.random(batch))
        angle = 2.0 * np.pi * rng.random(batch)
        candidate = np.empty((batch, dual.WIDTH))
        candidate[:, 0] = radius * np.cos(angle)
        candidate[:, 1] = radius * np.sin(angle)
        candidate[:, 2:6] = logit(rng.uniform(0.05, 0.95, (batch, 4)))
        candidate[:, 6] = logit(rng.uniform(0.4, 0.95, batch))
        candidate[:, 7] = logit(rng.uniform(0.05, 0.95, batch))
        candidate[:, 8] = logit(rng.uniform(0.05, 0.95, batch))
        normals = dual.stack_last(list(complete_normal(candidate[:, 0], candidate[:, 1])))
        facing = (normals @ directions.T).min(axis=1) >= 0.1
        accepted = candidate[facing][: count - filled]
        t[filled : filled + len(accepted)] = accepted
        filled += len(accepted)
    return t, rig


__all__ = [
    "CHANNEL_SLOTS",
    "PixelParams",
    "logit",
    "complete_normal",
    "slots_for",
    "encode_params",
    "build_channels",
    "shade_channels",
    "shade_batch",
    "shade_batch_with_partials",
    "shade_pixel_with_partials",
    "finite_difference_errors",
    "finite_difference_check",
    "random_configs",
]
