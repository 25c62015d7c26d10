import json

import numpy as np
import pytest

from staged_pbr.core.lighting import build_training_rig
from staged_pbr.core.materials import CHANNELS, MaterialCategory, validate_maps
from staged_pbr.scenes.scenegen import SceneSpec, render_observations
from staged_pbr.storage.bundle import (
    MAP_FILES,
    read_environment,
    read_labels,
    read_maps,
    read_observations,
    read_rig,
    read_scene_spec,
    write_labels,
    write_maps,
    write_observations,
    write_rig,
    write_scene_spec,
)
from staged_pbr.storage.pfm import write_pfm
from staged_pbr.utils.exceptions import DimensionError, ParameterError


def test_map_files_layout(tmp_path, small_scene):
    maps, _ = small_scene
    write_maps(tmp_path, maps)
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == sorted(list(MAP_FILES.values()) + ["mask.pfm"])
    assert MAP_FILES["displacement"] == "disp.pfm"


def test_maps_round_trip_at_float32(tmp_path, small_scene):
    maps, _ = small_scene
    back = read_maps(write_maps(tmp_path, maps))
    assert back.shape == maps.shape
    np.testing.assert_array_equal(back.mask, maps.mask)
    for name in CHANNELS:
        np.testing.assert_array_equal(back.channel(name), maps.channel(name).astype(np.float32))
    assert validate_maps(back) == []


def test_rewritten_bundle_is_identical(tmp_path, small_scene):
    maps, _ = small_scene
    first = read_maps(write_maps(tmp_path / "a", maps))
    write_maps(tmp_path / "b", first)
    for filename in MAP_FILES.values():
        assert (tmp_path / "a" / filename).read_bytes() == (tmp_path / "b" / filename).read_bytes()


def test_labels_round_trip(tmp_path, small_scene):
    _, labels = small_scene
    write_labels(tmp_path, labels)
    back = read_labels(tmp_path)
    np.testing.assert_array_equal(back.labels, labels.labels)
    assert back.labels.dtype == np.int64


def test_color_mask_rejected(tmp_path, small_scene):
    maps, _ = small_scene
    write_maps(tmp_path, maps)
    write_pfm(tmp_path / "mask.pfm", np.zeros(maps.shape + (3,)))
    with pytest.raises(DimensionError):
        read_maps(tmp_path)


def test_scene_spec_round_trip(tmp_path):
    spec = SceneSpec(seed=4, width=32, height=16, num_regions=3, categories=(MaterialCategory.SKIN, MaterialCategory.FABRIC))
    path = write_scene_spec(tmp_path, spec)
    data = json.loads(path.read_text(encoding="utf-8"))
    assert data["categories"] == ["Skin", "Fabric"]
    assert read_scene_spec(tmp_path) == spec
    assert read_scene_spec(path) == spec


def test_scene_spec_rejects_bad_json(tmp_path):
    path = tmp_path / "scene.json"
    path.write_text("{seed: 1", encoding="utf-8")
    with pytest.raises(ParameterError):
        read_scene_spec(path)


def test_scene_spec_rejects_unknown_keys(tmp_path):
    path = tmp_path / "scene.json"
    path.write_text(json.dumps({"seed": 1, "colour": "red"}), encoding="utf-8")
    with pytest.raises(ParameterError):
        read_scene_spec(path)


def test_rig_file_round_trip(tmp_path):
    rig = build_training_rig(2, 3)
    back = read_rig(write_rig(tmp_path / "lights.txt", rig))
    np.testing.assert_allclose(back.directions(), rig.directions(), atol=1e-8)


def test_observations_round_trip(tmp_path, small_scene):
    maps, _ = small_scene
    obs = render_observations(maps)
    write_maps(tmp_path, maps)
    target = write_observations(tmp_path, obs)
    assert (target / "obs_00.pfm").exists()
    assert (target / "obs_35.pfm").exists()
    back = read_observations(tmp_path)
    assert len(back) == 36
    np.testing.assert_array_equal(back.mask, maps.mask)
    np.testing.assert_array_equal(back.images, obs.images.astype(np.float32))


def test_environment_must_be_color(tmp_path):
    write_pfm(tmp_path / "env.pfm", np.ones((4, 8)))
    with pytest.raises(DimensionError):
        read_environment(tmp_path / "env.pfm")
    write_pfm(tmp_path / "env.pfm", np.ones((4, 8, 3)))
    assert read_environment(tmp_path / "env.pfm").height == 4
