"""Staged PBR - differentiable material shading and progressive inverse rendering."""

from staged_pbr.core.lighting import LightRig, build_fixed_rig, build_training_rig, envmap_to_lights
from staged_pbr.core.losses import Stage, default_policy, total_stage_loss
from staged_pbr.core.materials import MaterialCategory, MaterialMaps
from staged_pbr.core.shader import CameraModel, render_image
from staged_pbr.estimation.estimator import default_schedule, run_joint_baseline, run_progressive
from staged_pbr.scenes.scenegen import SceneSpec, generate_scene

__version__ = "0.1.0"

__all__ = [
    "CameraModel",
    "LightRig",
    "MaterialCategory",
    "MaterialMaps",
    "SceneSpec",
    "Stage",
    "build_fixed_rig",
    "build_training_rig",
    "default_policy",
    "default_schedule",
    "envmap_to_lights",
    "generate_scene",
    "render_image",
    "run_joint_baseline",
    "run_progressive",
    "total_stage_loss",
]
