"""Evaluation metrics: masked PSNR, normal angular error and the evaluation report."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from staged_pbr.core.lighting import LightRig, sample_random_light
from staged_pbr.core.materials import MaterialMaps, RegionLabels, classify_materials
from staged_pbr.core.shader import CameraModel, render_lights
from staged_pbr.monitoring.logging import get_logger
from staged_pbr.utils.exceptions import DimensionError, ParameterError

logger = get_logger(__name__)

PSNR_CAP = 99.0
HELDOUT_SEED = 1000
HELDOUT_LIGHTS = 5

# Column labels in report order
MAP_COLUMNS = (
    ("N", "normal"),
    ("D", "diffuse"),
    ("R", "roughness"),
    ("S", "specular"),
    ("SSS", "sss"),
    ("Disp", "displacement"),
)


def psnr(
    a: np.ndarray,
    b: np.ndarray,
    mask: np.ndarray,
    max_value: float = 1.0,
    cap: float = PSNR_CAP,
) -> float:
    """10·log10(max²/MSE) over masked pixels and all channels; ``cap`` when MSE is 0."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if a.shape != b.shape:
        raise DimensionError(f"psnr inputs differ in shape: {a.shape} vs {b.shape}")
    if a.shape[:2] != mask.shape:
        raise DimensionError(f"mask shape {mask.shape} does not match images {a.shape[:2]}")
    if not mask.any():
        raise ParameterError("psnr needs at least one masked pixel")
    mse = float(np.mean((a[mask] - b[mask]) ** 2))
    if mse == 0.0:
        return float(cap)
    return min(float(cap), 10.0 * float(np.log10(max_value**2 / mse)))


def normal_angular_error(pred: MaterialMaps, gt: MaterialMaps) -> float:
    """Mean angle in degrees between decoded normals over the ground-truth mask."""
    if pred.shape != gt.shape:
        raise DimensionError(f"maps differ in size: {pred.shape} vs {gt.shape}")
    if gt.masked_count == 0:
        raise ParameterError("normal error needs at least one masked pixel")
    cosine = np.sum(pred.decoded_normals()[gt.mask] * gt.decoded_normals()[gt.mask], axis=-1)
    return float(np.degrees(np.arccos(np.clip(cosine, -1.0, 1.0))).mean())


def classification_accuracy(pred: MaterialMaps, labels: RegionLabels, region: Optional[np.ndarray] = None) -> float:
    """Fraction of labeled pixels (optionally restricted to ``region``) classified correctly."""
    predicted = classify_materials(pred).labels
    selected = labels.labeled if region is None else labels.labeled & region
    if not selected.any():
        raise ParameterError("classification accuracy needs at least one labeled pixel")
    return float(np.mean(predicted[selected] == labels.labels[selected]))


def heldout_rig(seed: int = HELDOUT_SEED, count: int = HELDOUT_LIGHTS) -> LightRig:
    if count < 1:
        raise ParameterError(f"held-out rig needs at least one light, got {count}")
    return LightRig(sample_random_light(seed, i) for i in range(count))


@dataclass
class EvalReport:
    """PSNR per material map and per held-out light, with their means."""

    materials: dict[str, float]
    relight: list[float] = field(default_factory=list)
    normal_error_deg: Optional[float] = None

    @property
    def material_mean(self) -> float:
        return float(np.mean(list(self.materials.values())))

    @property
    def relight_mean(self) -> float:
        return float(np.mean(self.relight)) if self.relight else float("nan")

    @property
    def total_mean(self) -> float:
        return float(np.mean(list(self.materials.values()) + list(self.relight)))

    def header(self) -> list[str]:
        lights = [f"L{i}" for i in range(len(self.relight))]
        return list(self.materials) + lights + ["material_mean", "relight_mean", "total_mean"]

    def values(self) -> list[float]:
        return list(self.materials.values()) + list(self.relight) + [
            self.material_mean,
            self.relight_mean,
            self.total_mean,
        ]


def eval_report(
    pred: MaterialMaps,
    gt: MaterialMaps,
    heldout: LightRig,
    cam: Optional[CameraModel] = None,
    *,
    cap: float = PSNR_CAP,
    threads: int = 1,
) -> EvalReport:
    """Compare estimated maps to ground truth over the ground-truth mask.

    Normals are compared in encoded [0, 1] space. Relighting PSNR renders both
    map sets under each held-out light separately.
    """
    if pred.shape != gt.shape:
        raise DimensionError(f"maps differ in size: {pred.shape} vs {gt.shape}")
    mask = gt.mask
    materials = {label: psnr(pred.channel(name), gt.channel(name), mask, cap=cap) for label, name in MAP_COLUMNS}

    # pixels outside pred's own mask render black and count as error
    pred_images = render_lights(pred, heldout, threads=threads)
    gt_images = render_lights(gt, heldout, threads=threads)
    relight = [psnr(p, g, mask, cap=cap) for p, g in zip(pred_images, gt_images)]

    report = EvalReport(materials=materials, relight=relight, normal_error_deg=normal_angular_error(pred, gt))
    logger.info(
        "metrics.eval",
        material_mean=round(report.material_mean, 4),
        relight_mean=round(report.relight_mean, 4),
        normal_error_deg=round(report.normal_error_deg or 0.0, 4),
    )
    return report


__all__ = [
    "PSNR_CAP",
    "MAP_COLUMNS",
    "psnr",
    "normal_angular_error",
    "classification_accuracy",
    "heldout_rig",
    "EvalReport",
    "eval_report",
]
