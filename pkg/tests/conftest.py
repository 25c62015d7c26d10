import numpy as np
import pytest

from staged_pbr.core.materials import MaterialMaps
from staged_pbr.core.shader import CameraModel
from staged_pbr.scenes.scenegen import SceneSpec, generate_scene


@pytest.fixture
def camera():
    return CameraModel()


@pytest.fixture
def flat_maps():
    """4x4 maps, normal (0, 0, 1), gray diffuse, every pixel masked."""
    return MaterialMaps.constant(4, 4, diffuse=0.5, roughness=0.5, specular=0.2, sss=0.1, displacement=0.5)


@pytest.fixture
def masked_maps():
    """6x6 maps with a 4x4 masked interior and a tilted normal."""
    mask = np.zeros((6, 6), dtype=bool)
    mask[1:5, 1:5] = True
    return MaterialMaps.constant(
        6, 6, mask, normal=(0.2, -0.1, 0.9), diffuse=(0.6, 0.4, 0.3), roughness=0.6, specular=0.3, sss=0.2
    )


@pytest.fixture(scope="session")
def small_scene():
    return generate_scene(SceneSpec(seed=3, width=24, height=24, num_regions=4))
