"""Stage policies, the controlled-material substitution, and the loss terms."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Iterable, Mapping, Optional

import numpy as np

from staged_pbr.core.lighting import LightRig
from staged_pbr.core.materials import CHANNELS, COLOR_CHANNELS, MaterialMaps
from staged_pbr.core.shader import CameraModel, render_lights
from staged_pbr.monitoring.logging import get_logger
from staged_pbr.utils.exceptions import ConfigurationError, DimensionError, ParameterError

logger = get_logger(__name__)


class Stage(str, Enum):
    GEOMETRY = "geometry"
    ALBEDO = "albedo"
    RSS = "rss"
    FINETUNE = "finetune"

    @property
    def order(self) -> int:
        return list(Stage).index(self)

    @classmethod
    def parse(cls, text: str) -> "Stage":
        try:
            return cls(text.strip().lower())
        except ValueError as exc:
            raise ParameterError(f"Unknown stage {text!r}") from exc


STAGE_CHANNELS: Mapping[Stage, tuple[str, ...]] = MappingProxyType(
    {
        Stage.GEOMETRY: ("normal", "displacement"),
        Stage.ALBEDO: ("diffuse",),
        Stage.RSS: ("roughness", "specular", "sss"),
        Stage.FINETUNE: CHANNELS,
    }
)


class SourceKind(str, Enum):
    OPTIMIZED = "optimized"
    FIXED = "fixed"
    REFERENCE = "reference"


@dataclass(frozen=True)
class ChannelSource:
    kind: SourceKind
    value: Optional[float] = None

    def __post_init__(self) -> None:
        if (self.kind is SourceKind.FIXED) != (self.value is not None):
            raise ParameterError("a fixed source needs a value and only a fixed source may carry one")
        if self.value is not None and not 0.0 <= self.value <= 1.0:
            raise ParameterError(f"fixed value {self.value} outside [0, 1]")

    @classmethod
    def optimized(cls) -> "ChannelSource":
        return cls(SourceKind.OPTIMIZED)

    @classmethod
    def fixed(cls, value: float) -> "ChannelSource":
        return cls(SourceKind.FIXED, float(value))

    @classmethod
    def reference(cls) -> "ChannelSource":
        return cls(SourceKind.REFERENCE)

    def __str__(self) -> str:
        return f"fixed({self.value:g})" if self.kind is SourceKind.FIXED else self.kind.value


@dataclass(frozen=True)
class ControlPolicy:
    """Where each channel comes from while a stage is rendered."""

    stage: Stage
    sources: Mapping[str, ChannelSource] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if set(self.sources) != set(CHANNELS):
            missing = sorted(set(CHANNELS) - set(self.sources))
            extra = sorted(set(self.sources) - set(CHANNELS))
            raise ConfigurationError(f"policy must cover every channel once (missing {missing}, unknown {extra})")
        if self.sources["normal"].kind is SourceKind.FIXED:
            raise ConfigurationError("normal cannot be a fixed source")
        object.__setattr__(self, "sources", MappingProxyType(dict(self.sources)))

    def source(self, channel: str) -> ChannelSource:
        return self.sources[channel]

    @property
    def optimized(self) -> tuple[str, ...]:
        return tuple(c for c in CHANNELS if self.sources[c].kind is SourceKind.OPTIMIZED)

    def describe(self) -> str:
        return ", ".join(f"{c}={self.sources[c]}" for c in CHANNELS)


def default_policy(stage: Stage) -> ControlPolicy:
    """Controlled settings per stage: glossy for geometry, matte for albedo."""
    stage = Stage(stage)
    opt, ref, fixed = ChannelSource.optimized(), ChannelSource.reference(), ChannelSource.fixed
    if stage is Stage.GEOMETRY:
        sources = dict(normal=opt, displacement=opt, diffuse=ref, sss=ref, roughness=fixed(0.2), specular=fixed(0.5))
    elif stage is Stage.ALBEDO:
        sources = dict(normal=ref, displacement=ref, diffuse=opt, sss=ref, roughness=fixed(0.8), specular=fixed(0.03))
    elif stage is Stage.RSS:
        sources = dict(normal=ref, displacement=ref, diffuse=ref, roughness=opt, specular=opt, sss=opt)
    else:
        sources = {c: opt for c in CHANNELS}
    return ControlPolicy(stage, sources)


def uncontrolled_policy(stage: Stage) -> ControlPolicy:
    """default_policy with every fixed control replaced by the reference value."""
    base = default_policy(stage)
    sources = {
        c: ChannelSource.reference() if s.kind is SourceKind.FIXED else s for c, s in base.sources.items()
    }
    return ControlPolicy(base.stage, sources)


def _check_aligned(pred: MaterialMaps, ref: MaterialMaps) -> None:
    if pred.shape != ref.shape:
        raise DimensionError(f"maps {pred.shape} and {ref.shape} are not aligned")
    if not np.array_equal(pred.mask, ref.mask):
        raise DimensionError("maps do not share a mask")


def controlled_maps(own: MaterialMaps, reference: MaterialMaps, policy: ControlPolicy) -> MaterialMaps:
    """One side of the controlled comparison: optimized channels from ``own``."""
    _check_aligned(own, reference)
    channels: dict[str, np.ndarray] = {}
    for name in CHANNELS:
        src = policy.source(name)
        if src.kind is SourceKind.OPTIMIZED:
            channels[name] = own.channel(name)
        elif src.kind is SourceKind.REFERENCE:
            channels[name] = reference.channel(name)
        else:
            mask = own.mask[..., None] if name in COLOR_CHANNELS else own.mask
            channels[name] = np.broadcast_to(np.where(mask, src.value, 0.0), own.channel(name).shape).copy()
    return own.with_channels(**channels)


def l1_map_loss(pred: MaterialMaps, ref: MaterialMaps, channels: Iterable[str]) -> float:
    """Mean |pred − ref| over masked pixels, averaged over the listed channels."""
    _check_aligned(pred, ref)
    channels = [c for c in CHANNELS if c in set(channels)]
    if not channels or pred.masked_count == 0:
        return 0.0
    per_channel = [float(np.abs(pred.channel(c)[pred.mask] - ref.channel(c)[pred.mask]).mean()) for c in channels]
    return sum(per_channel) / len(per_channel)


def per_light_l1(pred_images: np.ndarray, ref_images: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Masked mean of the RGB-averaged |difference| for each light, shape (L,)."""
    count = int(np.count_nonzero(mask))
    if count == 0:
        return np.zeros(pred_images.shape[0])
    diff = np.abs(pred_images[:, mask] - ref_images[:, mask]).mean(axis=-1)
    return diff.sum(axis=1) / count


def multi_illum_render_loss(
    pred: MaterialMaps,
    ref: MaterialMaps,
    rig: LightRig,
    cam: Optional[CameraModel] = None,
    *,
    threads: int = 1,
) -> float:
    """Σ over lights of the masked L1 between per-light renders."""
    if len(rig) == 0:
        raise ParameterError("render loss needs at least one light")
    _check_aligned(pred, ref)
    per_light = per_light_l1(render_lights(pred, rig, threads=threads), render_lights(ref, rig, threads=threads), pred.mask)
    total = 0.0
    for value in per_light:
        total += float(value)
    return total


def cpr_loss(
    pred: MaterialMaps,
    ref: MaterialMaps,
    policy: ControlPolicy,
    rig: LightRig,
    cam: Optional[CameraModel] = None,
    *,
    threads: int = 1,
) -> float:
    """Render loss between controlled sets; only optimized channels can differ."""
    if policy.stage is Stage.FINETUNE:
        raise ConfigurationError("the finetune stage uses multi_illum_render_loss, not cpr_loss")
    return multi_illum_render_loss(
        controlled_maps(pred, ref, policy),
        controlled_maps(ref, ref, policy),
        rig,
        cam,
        threads=threads,
    )


@dataclass(frozen=True)
class LossWeights:
    pixel: float = 1.0
    render: float = 1.0

    def __post_init__(self) -> None:
        if self.pixel < 0 or self.render < 0:
            raise ParameterError(f"loss weights must be non-negative, got {self}")

    @classmethod
    def from_config(cls, config) -> "LossWeights":
        section = config.estimator.weights
        return cls(pixel=float(section.pixel), render=float(section.render))


@dataclass(frozen=True)
class LossReport:
    pixel: float
    render: float
    cpr: float
    total: float
    count: int

    @property
    def render_term(self) -> float:
        return self.render + self.cpr

    def as_row(self, stage: Stage, step: int) -> dict[str, object]:
        return {
            "stage": Stage(stage).value,
            "step": step,
            "pixel_term": self.pixel,
            "render_term": self.render_term,
            "total": self.total,
        }


def total_stage_loss(
    stage: Stage,
    pred: MaterialMaps,
    ref: MaterialMaps,
    rig: LightRig,
    cam: Optional[CameraModel] = None,
    weights: LossWeights = LossWeights(),
    policy: Optional[ControlPolicy] = None,
    *,
    threads: int = 1,
) -> LossReport:
    """Joint loss of one stage: pixel L1 on its channels plus its rendering term."""
    stage = Stage(stage)
    policy = policy or default_policy(stage)
    pixel = l1_map_loss(pred, ref, policy.optimized) if weights.pixel > 0 else 0.0
    render = cpr = 0.0
    if weights.render > 0:
        if stage is Stage.FINETUNE:
            render = multi_illum_render_loss(pred, ref, rig, cam, threads=threads)
        else:
            cpr = cpr_loss(pred, ref, policy, rig, cam, threads=threads)
    total = weights.pixel * pixel + weights.render * (render + cpr)
    return LossReport(pixel=pixel, render=render, cpr=cpr, total=total, count=pred.masked_count)


__all__ = [
    "Stage",
    "STAGE_CHANNELS",
    "SourceKind",
    "ChannelSource",
    "ControlPolicy",
    "LossWeights",
    "LossReport",
    "default_policy",
    "uncontrolled_policy",
    "controlled_maps",
    "l1_map_loss",
    "per_light_l1",
    "multi_illum_render_loss",
    "cpr_loss",
    "total_stage_loss",
]
