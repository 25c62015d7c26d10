"""On-disk scene bundles: map PFMs, labels, scene description and observations.

A bundle directory holds::

    normal.pfm diffuse.pfm roughness.pfm specular.pfm sss.pfm disp.pfm mask.pfm
    labels.pfm                 (optional, category index, -1 unlabeled)
    scene.json                 (optional, the generating SceneSpec)
    observations/obs_00.pfm .. (optional, one image per light)
    observations/lights.txt    (rig dump, one light per line)
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Union

import numpy as np

from staged_pbr.core.lighting import EnvironmentMap, LightRig, format_rig, parse_rig
from staged_pbr.core.materials import CHANNELS, MaterialMaps, RegionLabels
from staged_pbr.estimation.estimator import ObservationSet
from staged_pbr.monitoring.logging import get_logger
from staged_pbr.scenes.scenegen import SceneSpec
from staged_pbr.storage.pfm import read_pfm, write_pfm
from staged_pbr.utils.exceptions import DimensionError, ParameterError

logger = get_logger(__name__)

PathLike = Union[str, Path]

MAP_FILES = {
    "normal": "normal.pfm",
    "diffuse": "diffuse.pfm",
    "roughness": "roughness.pfm",
    "specular": "specular.pfm",
    "sss": "sss.pfm",
    "displacement": "disp.pfm",
}
MASK_FILE = "mask.pfm"
LABELS_FILE = "labels.pfm"
SCENE_FILE = "scene.json"
OBSERVATION_DIR = "observations"
LIGHTS_FILE = "lights.txt"


def write_maps(directory: PathLike, maps: MaterialMaps) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name in CHANNELS:
        write_pfm(directory / MAP_FILES[name], maps.channel(name))
    write_pfm(directory / MASK_FILE, maps.mask.astype(np.float32))
    logger.info("bundle.maps.write", path=str(directory), width=maps.width, height=maps.height)
    return directory


def read_maps(directory: PathLike) -> MaterialMaps:
    directory = Path(directory)
    mask = read_pfm(directory / MASK_FILE)
    if mask.ndim != 2:
        raise DimensionError(f"{MASK_FILE} must be single-channel")
    buffers = {name: read_pfm(directory / MAP_FILES[name]).astype(np.float64) for name in CHANNELS}
    height, width = mask.shape
    return MaterialMaps(width=width, height=height, mask=mask > 0.5, **buffers)


def write_labels(directory: PathLike, labels: RegionLabels) -> Path:
    return write_pfm(Path(directory) / LABELS_FILE, labels.labels.astype(np.float32))


def read_labels(directory: PathLike) -> RegionLabels:
    values = read_pfm(Path(directory) / LABELS_FILE)
    if values.ndim != 2:
        raise DimensionError(f"{LABELS_FILE} must be single-channel")
    height, width = values.shape
    return RegionLabels(width, height, np.rint(values).astype(np.int64))


def write_scene_spec(directory: PathLike, spec: SceneSpec) -> Path:
    path = Path(directory) / SCENE_FILE
    path.write_text(json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_scene_spec(path: PathLike) -> SceneSpec:
    path = Path(path)
    if path.is_dir():
        path = path / SCENE_FILE
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParameterError(f"{path}: not valid JSON ({exc})") from exc
    return SceneSpec.from_dict(data)


def write_rig(path: PathLike, rig: LightRig) -> Path:
    path = Path(path)
    path.write_text(format_rig(rig), encoding="utf-8")
    return path


def read_rig(path: PathLike) -> LightRig:
    return parse_rig(Path(path).read_text(encoding="utf-8"))


def write_observations(directory: PathLike, obs: ObservationSet) -> Path:
    target = Path(directory) / OBSERVATION_DIR
    target.mkdir(parents=True, exist_ok=True)
    for i, image in enumerate(obs.images):
        write_pfm(target / f"obs_{i:02d}.pfm", image)
    write_rig(target / LIGHTS_FILE, obs.lights)
    logger.info("bundle.observations.write", path=str(target), lights=len(obs.lights))
    return target


def read_observations(directory: PathLike) -> ObservationSet:
    """Observations of a bundle; the mask comes from the bundle's mask.pfm."""
    directory = Path(directory)
    mask = read_pfm(directory / MASK_FILE) > 0.5
    source = directory / OBSERVATION_DIR
    rig = read_rig(source / LIGHTS_FILE)
    images = [read_pfm(source / f"obs_{i:02d}.pfm").astype(np.float64) for i in range(len(rig))]
    for i, image in enumerate(images):
        if image.ndim != 3:
            raise DimensionError(f"observation {i} must be a 3-channel image")
    stacked = np.stack(images) if images else np.zeros((0,) + mask.shape + (3,))
    return ObservationSet(lights=rig, images=stacked, mask=mask)


def read_environment(path: PathLike) -> EnvironmentMap:
    radiance = read_pfm(path)
    if radiance.ndim != 3:
        raise DimensionError("environment maps must be 3-channel PFMs")
    return EnvironmentMap(radiance.astype(np.float64))


__all__ = [
    "MAP_FILES",
    "write_maps",
    "read_maps",
    "write_labels",
    "read_labels",
    "write_scene_spec",
    "read_scene_spec",
    "write_rig",
    "read_rig",
    "write_observations",
    "read_observations",
    "read_environment",
]
