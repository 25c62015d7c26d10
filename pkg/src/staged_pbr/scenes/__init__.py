"""Synthetic scenes."""

from staged_pbr.scenes.scenegen import SceneSpec, generate_scene, render_observations

__all__ = ["SceneSpec", "generate_scene", "render_observations"]
