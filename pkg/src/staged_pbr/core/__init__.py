"""Core shading model - materials, lights, BSDF, gradients and losses."""

from staged_pbr.core.dual import Dual
from staged_pbr.core.lighting import DirectionalLight, EnvironmentMap, LightRig
from staged_pbr.core.losses import ControlPolicy, LossReport, Stage
from staged_pbr.core.materials import MaterialCategory, MaterialMaps, RegionLabels
from staged_pbr.core.shader import CameraModel, PixelMaterial

__all__ = [
    "CameraModel",
    "ControlPolicy",
    "DirectionalLight",
    "Dual",
    "EnvironmentMap",
    "LightRig",
    "LossReport",
    "MaterialCategory",
    "MaterialMaps",
    "PixelMaterial",
    "RegionLabels",
    "Stage",
]
