"""Material maps, the four-category value table, validation, and editing."""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import IntEnum
from types import MappingProxyType
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from staged_pbr.monitoring.logging import get_logger
from staged_pbr.utils.exceptions import DimensionError, ParameterError

logger = get_logger(__name__)

CHANNELS: tuple[str, ...] = ("normal", "diffuse", "roughness", "specular", "sss", "displacement")
COLOR_CHANNELS = frozenset({"normal", "diffuse"})
NORMAL_NORM_TOLERANCE = 1e-3
UNLABELED = -1


class MaterialCategory(IntEnum):
    """Material classes; the integer value fixes the iteration and tie-break order."""

    HAIR = 0
    SKIN = 1
    FABRIC = 2
    LEATHER = 3

    @classmethod
    def parse(cls, text: str) -> "MaterialCategory":
        try:
            return cls[text.strip().upper()]
        except KeyError as exc:
            choices = ", ".join(c.name.title() for c in cls)
            raise ParameterError(f"Unknown material category {text!r} (expected one of {choices})") from exc


@dataclass(frozen=True)
class CategoryParams:
    specular: float
    roughness: float
    sss: float

    def as_rss(self) -> tuple[float, float, float]:
        """Return the (roughness, specular, sss) triple used for classification."""
        return (self.roughness, self.specular, self.sss)


CATEGORY_TABLE: Mapping[MaterialCategory, CategoryParams] = MappingProxyType(
    {
        MaterialCategory.HAIR: CategoryParams(specular=0.239, roughness=0.500, sss=0.00),
        MaterialCategory.SKIN: CategoryParams(specular=0.184, roughness=0.400, sss=0.08),
        MaterialCategory.FABRIC: CategoryParams(specular=0.263, roughness=0.850, sss=0.00),
        MaterialCategory.LEATHER: CategoryParams(specular=0.224, roughness=0.250, sss=0.00),
    }
)


def category_params(cat: MaterialCategory) -> tuple[float, float, float]:
    """Return the table row of a category as (specular, roughness, sss)."""
    row = CATEGORY_TABLE[MaterialCategory(cat)]
    return (row.specular, row.roughness, row.sss)


def encode_normals(normals: np.ndarray) -> np.ndarray:
    return normals * 0.5 + 0.5


def decode_normals(encoded: np.ndarray) -> np.ndarray:
    """Decode n*0.5+0.5 storage back to unit vectors (zero vectors stay zero)."""
    raw = encoded * 2.0 - 1.0
    norm = np.linalg.norm(raw, axis=-1, keepdims=True)
    return np.divide(raw, norm, out=np.zeros_like(raw), where=norm > 0)


@dataclass
class MaterialMaps:
    """Screen-space material maps; arrays are indexed [row v, column u]."""

    width: int
    height: int
    normal: np.ndarray
    diffuse: np.ndarray
    roughness: np.ndarray
    specular: np.ndarray
    sss: np.ndarray
    displacement: np.ndarray
    mask: np.ndarray

    def __post_init__(self) -> None:
        expected = (self.height, self.width)
        for name in CHANNELS:
            buffer = getattr(self, name)
            want = expected + (3,) if name in COLOR_CHANNELS else expected
            if buffer.shape != want:
                raise DimensionError(f"{name} has shape {buffer.shape}, expected {want}")
        if self.mask.shape != expected:
            raise DimensionError(f"mask has shape {self.mask.shape}, expected {expected}")
        self.mask = self.mask.astype(bool)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def masked_count(self) -> int:
        return int(np.count_nonzero(self.mask))

    def channel(self, name: str) -> np.ndarray:
        if name not in CHANNELS:
            raise ParameterError(f"Unknown channel {name!r}")
        return getattr(self, name)

    def copy(self) -> "MaterialMaps":
        return replace(self, **{name: getattr(self, name).copy() for name in CHANNELS}, mask=self.mask.copy())

    def with_channels(self, **channels: np.ndarray) -> "MaterialMaps":
        """Return a shallow copy with the given channel buffers swapped in."""
        unknown = set(channels) - set(CHANNELS)
        if unknown:
            raise ParameterError(f"Unknown channel(s): {sorted(unknown)}")
        return replace(self, **channels)

    def decoded_normals(self) -> np.ndarray:
        return decode_normals(self.normal)

    @classmethod
    def constant(
        cls,
        width: int,
        height: int,
        mask: Optional[np.ndarray] = None,
        *,
        normal: Sequence[float] = (0.0, 0.0, 1.0),
        diffuse: Sequence[float] | float = 0.5,
        roughness: float = 0.5,
        specular: float = 0.1,
        sss: float = 0.0,
        displacement: float = 0.5,
    ) -> "MaterialMaps":
        """Maps holding one value per channel on masked pixels and zeros elsewhere."""
        mask = np.ones((height, width), dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
        m3 = mask[..., None]
        n = np.asarray(normal, dtype=np.float64)
        n = n / np.linalg.norm(n)
        d = np.broadcast_to(np.asarray(diffuse, dtype=np.float64), (3,))
        return cls(
            width=width,
            height=height,
            normal=np.where(m3, encode_normals(n), 0.0),
            diffuse=np.where(m3, d, 0.0),
            roughness=np.where(mask, float(roughness), 0.0),
            specular=np.where(mask, float(specular), 0.0),
            sss=np.where(mask, float(sss), 0.0),
            displacement=np.where(mask, float(displacement), 0.0),
            mask=mask,
        )


@dataclass
class RegionLabels:
    """Per-pixel category indices aligned to a MaterialMaps; UNLABELED (-1) elsewhere."""

    width: int
    height: int
    labels: np.ndarray

    def __post_init__(self) -> None:
        if self.labels.shape != (self.height, self.width):
            raise DimensionError(f"labels have shape {self.labels.shape}, expected {(self.height, self.width)}")
        self.labels = self.labels.astype(np.int64)

    def region(self, cat: MaterialCategory) -> np.ndarray:
        return self.labels == int(cat)

    @property
    def labeled(self) -> np.ndarray:
        return self.labels != UNLABELED


@dataclass(frozen=True)
class Violation:
    channel: str
    pixel: tuple[int, int]  # (u, v)
    rule: str

    def __str__(self) -> str:
        return f"{self.channel}@(u={self.pixel[0]}, v={self.pixel[1]}): {self.rule}"


def _range_violations(name: str, values: np.ndarray, mask: np.ndarray) -> Iterable[Violation]:
    bad = ~np.isfinite(values) | (values < 0.0) | (values > 1.0)
    if values.ndim == 3:
        bad = bad.any(axis=-1)
    for v, u in zip(*np.nonzero(bad & mask)):
        yield Violation(name, (int(u), int(v)), "value outside [0, 1]")


def validate_maps(m: MaterialMaps) -> list[Violation]:
    """List every broken MaterialMaps invariant; never raises."""
    violations: list[Violation] = []
    expected = (m.height, m.width)
    for name in CHANNELS + ("mask",):
        buffer = getattr(m, name)
        if buffer.shape[:2] != expected:
            violations.append(Violation(name, (-1, -1), f"shape {buffer.shape[:2]} != {expected}"))
    if violations:
        return violations

    mask = m.mask
    for name in CHANNELS:
        violations.extend(_range_violations(name, m.channel(name), mask))

    raw = m.normal * 2.0 - 1.0
    norms = np.linalg.norm(raw, axis=-1)
    bad_norm = (np.abs(norms - 1.0) > NORMAL_NORM_TOLERANCE) & mask
    for v, u in zip(*np.nonzero(bad_norm)):
        violations.append(Violation("normal", (int(u), int(v)), f"decoded norm {norms[v, u]:.6g} != 1"))
    back_facing = (raw[..., 2] < 0.0) & mask
    for v, u in zip(*np.nonzero(back_facing)):
        violations.append(Violation("normal", (int(u), int(v)), "decoded z < 0"))

    outside = ~mask
    for name in CHANNELS:
        buffer = m.channel(name)
        nonzero = buffer != 0.0
        if buffer.ndim == 3:
            nonzero = nonzero.any(axis=-1)
        for v, u in zip(*np.nonzero(nonzero & outside)):
            violations.append(Violation(name, (int(u), int(v)), "unmasked pixel is not zero"))
    return violations


def _table_matrix() -> np.ndarray:
    return np.array([CATEGORY_TABLE[c].as_rss() for c in MaterialCategory], dtype=np.float64)


def classify_materials(m: MaterialMaps) -> RegionLabels:
    """Label each masked pixel with the category whose (r, s, sss) row is nearest."""
    features = np.stack([m.roughness, m.specular, m.sss], axis=-1)
    rows = _table_matrix()
    distances = np.linalg.norm(features[..., None, :] - rows, axis=-1)
    # argmin returns the first minimum, which is the category order tie-break
    nearest = np.argmin(distances, axis=-1)
    labels = np.where(m.mask, nearest, UNLABELED)
    return RegionLabels(width=m.width, height=m.height, labels=labels)


def apply_category_edit(
    m: MaterialMaps,
    labels: RegionLabels,
    target: MaterialCategory,
    new: MaterialCategory,
    tint: Optional[Sequence[float]] = None,
) -> MaterialMaps:
    """Swap the (r, s, sss) of one labeled region for another category's row.

    When ``new`` equals ``target`` the region keeps its own values, blended
    boundary pixels included, so only the tint applies.
    """
    if (labels.height, labels.width) != m.shape:
        raise DimensionError(f"labels {labels.labels.shape} do not match maps {m.shape}")

    region = labels.region(target)
    edited = m
    if MaterialCategory(new) != MaterialCategory(target):
        row = CATEGORY_TABLE[MaterialCategory(new)]
        edited = m.with_channels(
            roughness=np.where(region, row.roughness, m.roughness),
            specular=np.where(region, row.specular, m.specular),
            sss=np.where(region, row.sss, m.sss),
        )
    if tint is not None:
        factor = np.asarray(tint, dtype=np.float64)
        if factor.shape != (3,):
            raise ParameterError(f"tint must have three components, got {tint!r}")
        tinted = np.clip(m.diffuse * factor, 0.0, 1.0)
        edited = edited.with_channels(diffuse=np.where(region[..., None], tinted, m.diffuse))

    logger.info(
        "materials.edit",
        target=MaterialCategory(target).name,
        new=MaterialCategory(new).name,
        pixels=int(np.count_nonzero(region)),
        tinted=tint is not None,
    )
    return edited


__all__ = [
    "CHANNELS",
    "UNLABELED",
    "MaterialCategory",
    "CategoryParams",
    "CATEGORY_TABLE",
    "MaterialMaps",
    "RegionLabels",
    "Violation",
    "category_params",
    "encode_normals",
    "decode_normals",
    "validate_maps",
    "classify_materials",
    "apply_category_edit",
]
