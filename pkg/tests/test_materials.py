import numpy as np
import pytest

from staged_pbr.core.materials import (
    CATEGORY_TABLE,
    UNLABELED,
    MaterialCategory,
    MaterialMaps,
    RegionLabels,
    apply_category_edit,
    category_params,
    classify_materials,
    decode_normals,
    encode_normals,
    validate_maps,
)
from staged_pbr.utils.exceptions import DimensionError, ParameterError


@pytest.mark.parametrize(
    "cat, expected",
    [
        (MaterialCategory.HAIR, (0.239, 0.500, 0.00)),
        (MaterialCategory.SKIN, (0.184, 0.400, 0.08)),
        (MaterialCategory.FABRIC, (0.263, 0.850, 0.00)),
        (MaterialCategory.LEATHER, (0.224, 0.250, 0.00)),
    ],
)
def test_category_params_match_table(cat, expected):
    assert category_params(cat) == expected


def test_categories_are_ordered():
    assert list(MaterialCategory) == sorted(MaterialCategory)
    assert [c.name for c in MaterialCategory] == ["HAIR", "SKIN", "FABRIC", "LEATHER"]


@pytest.mark.parametrize("text", ["Fabric", "fabric", " LEATHER "])
def test_category_parse(text):
    assert MaterialCategory.parse(text) in (MaterialCategory.FABRIC, MaterialCategory.LEATHER)


def test_category_parse_rejects_unknown():
    with pytest.raises(ParameterError):
        MaterialCategory.parse("metal")


def test_normal_encoding_roundtrip():
    n = np.array([[0.6, 0.0, 0.8], [0.0, 0.0, 1.0]])
    np.testing.assert_allclose(decode_normals(encode_normals(n)), n, atol=1e-12)


def test_constant_maps_are_valid(flat_maps, masked_maps):
    assert validate_maps(flat_maps) == []
    assert validate_maps(masked_maps) == []
    assert masked_maps.masked_count == 16
    assert not masked_maps.diffuse[0, 0].any()


def test_mismatched_buffers_rejected(flat_maps):
    with pytest.raises(DimensionError):
        MaterialMaps(
            width=4,
            height=4,
            normal=flat_maps.normal,
            diffuse=flat_maps.diffuse,
            roughness=np.zeros((3, 4)),
            specular=flat_maps.specular,
            sss=flat_maps.sss,
            displacement=flat_maps.displacement,
            mask=flat_maps.mask,
        )


def test_validate_reports_bad_normal(flat_maps):
    normal = flat_maps.normal.copy()
    normal[2, 1] = (1.0, 1.0, 1.0)
    violations = validate_maps(flat_maps.with_channels(normal=normal))
    assert len(violations) == 1
    assert violations[0].channel == "normal"
    assert violations[0].pixel == (1, 2)


def test_validate_reports_range(flat_maps):
    roughness = flat_maps.roughness.copy()
    roughness[0, 3] = 1.2
    violations = validate_maps(flat_maps.with_channels(roughness=roughness))
    assert [(v.channel, v.pixel) for v in violations] == [("roughness", (3, 0))]


def test_validate_reports_nonzero_background(masked_maps):
    sss = masked_maps.sss.copy()
    sss[0, 0] = 0.5
    violations = validate_maps(masked_maps.with_channels(sss=sss))
    assert len(violations) == 1
    assert "unmasked" in violations[0].rule


def test_validate_reports_back_facing_normal(flat_maps):
    normal = flat_maps.normal.copy()
    normal[1, 1] = encode_normals(np.array([0.0, 0.6, -0.8]))
    violations = validate_maps(flat_maps.with_channels(normal=normal))
    assert any("z < 0" in v.rule for v in violations)


@pytest.mark.parametrize(
    "rss, expected",
    [
        ((0.400, 0.184, 0.08), MaterialCategory.SKIN),
        ((0.41, 0.19, 0.07), MaterialCategory.SKIN),
        ((0.85, 0.263, 0.0), MaterialCategory.FABRIC),
        ((0.25, 0.224, 0.0), MaterialCategory.LEATHER),
        ((0.5, 0.239, 0.0), MaterialCategory.HAIR),
    ],
)
def test_classify_nearest_row(rss, expected):
    r, s, sss = rss
    maps = MaterialMaps.constant(2, 2, roughness=r, specular=s, sss=sss)
    labels = classify_materials(maps)
    assert (labels.labels == int(expected)).all()


def _table_maps():
    """2x2 maps with one pixel per category."""
    maps = MaterialMaps.constant(2, 2, diffuse=(0.8, 0.6, 0.4))
    rows = np.array([CATEGORY_TABLE[c].as_rss() for c in MaterialCategory]).reshape(2, 2, 3)
    maps = maps.with_channels(roughness=rows[..., 0].copy(), specular=rows[..., 1].copy(), sss=rows[..., 2].copy())
    labels = RegionLabels(2, 2, np.arange(4).reshape(2, 2))
    return maps, labels


def test_classify_recovers_table_maps():
    maps, labels = _table_maps()
    np.testing.assert_array_equal(classify_materials(maps).labels, labels.labels)


def test_classify_leaves_background_unlabeled(masked_maps):
    labels = classify_materials(masked_maps)
    assert (labels.labels[~masked_maps.mask] == UNLABELED).all()
    assert (labels.labeled == masked_maps.mask).all()


def test_edit_fabric_to_leather():
    maps, labels = _table_maps()
    edited = apply_category_edit(maps, labels, MaterialCategory.FABRIC, MaterialCategory.LEATHER)
    fabric = labels.region(MaterialCategory.FABRIC)
    assert edited.roughness[fabric][0] == 0.250
    assert edited.specular[fabric][0] == 0.224
    assert edited.sss[fabric][0] == 0.0
    np.testing.assert_array_equal(edited.diffuse, maps.diffuse)
    np.testing.assert_array_equal(edited.roughness[~fabric], maps.roughness[~fabric])


def test_identity_edit_is_bit_exact():
    maps, labels = _table_maps()
    edited = apply_category_edit(maps, labels, MaterialCategory.HAIR, MaterialCategory.HAIR, tint=(1.0, 1.0, 1.0))
    for name in ("normal", "diffuse", "roughness", "specular", "sss", "displacement"):
        np.testing.assert_array_equal(edited.channel(name), maps.channel(name))


def test_tint_halves_skin_diffuse():
    maps, labels = _table_maps()
    edited = apply_category_edit(maps, labels, MaterialCategory.SKIN, MaterialCategory.SKIN, tint=(0.5, 0.5, 0.5))
    skin = labels.region(MaterialCategory.SKIN)
    np.testing.assert_allclose(edited.diffuse[skin], maps.diffuse[skin] * 0.5)
    np.testing.assert_array_equal(edited.diffuse[~skin], maps.diffuse[~skin])
    np.testing.assert_array_equal(edited.roughness, maps.roughness)


def test_edit_then_classify_is_stable():
    maps, labels = _table_maps()
    edited = apply_category_edit(maps, labels, MaterialCategory.LEATHER, MaterialCategory.LEATHER)
    np.testing.assert_array_equal(classify_materials(edited).labels, classify_materials(maps).labels)


def test_edit_rejects_misaligned_labels(flat_maps):
    labels = RegionLabels(2, 2, np.zeros((2, 2)))
    with pytest.raises(DimensionError):
        apply_category_edit(flat_maps, labels, MaterialCategory.HAIR, MaterialCategory.SKIN)


def test_edit_rejects_bad_tint():
    maps, labels = _table_maps()
    with pytest.raises(ParameterError):
        apply_category_edit(maps, labels, MaterialCategory.HAIR, MaterialCategory.SKIN, tint=(1.0, 1.0))


def test_same_category_edit_keeps_blended_values():
    maps, labels = _table_maps()
    roughness = maps.roughness.copy()
    roughness[0, 0] = 0.42
    blended = maps.with_channels(roughness=roughness)
    edited = apply_category_edit(blended, labels, MaterialCategory.HAIR, MaterialCategory.HAIR)
    assert edited.roughness[0, 0] == 0.42
