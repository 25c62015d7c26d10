import numpy as np
import pytest

from staged_pbr.core.lighting import DirectionalLight, LightRig, build_fixed_rig
from staged_pbr.core.losses import Stage, default_policy
from staged_pbr.core.materials import CHANNELS, MaterialMaps
from staged_pbr.core.shader import shade_lights
from staged_pbr.estimation.estimator import (
    EstimatorSettings,
    Mode,
    ObservationSet,
    StageConfig,
    _PixelState,
    default_schedule,
    init_estimate,
    optimize_stage,
    run_joint_baseline,
    run_progressive,
)
from staged_pbr.scenes.scenegen import render_observations
from staged_pbr.utils.exceptions import (
    ConfigurationError,
    DimensionError,
    MaterialValidationError,
    ParameterError,
)


def _init_for(maps: MaterialMaps) -> MaterialMaps:
    return init_estimate(maps.width, maps.height, maps.mask)


def _assert_maps_equal(a: MaterialMaps, b: MaterialMaps, channels=CHANNELS):
    for name in channels:
        np.testing.assert_array_equal(a.channel(name), b.channel(name), err_msg=name)


@pytest.fixture(scope="module")
def observations(small_scene):
    maps, _ = small_scene
    return render_observations(maps)


def test_default_schedule_drops_empty_stages():
    schedule = default_schedule(Mode.TRAINING_LOSS, (5, 0, 3, 2), 0.01)
    assert [cfg.stage for cfg in schedule] == [Stage.GEOMETRY, Stage.RSS, Stage.FINETUNE]
    assert all(cfg.learning_rate == 0.01 for cfg in schedule)
    assert all(cfg.mode is Mode.TRAINING_LOSS for cfg in schedule)


def test_default_schedule_needs_four_counts():
    with pytest.raises(ConfigurationError):
        default_schedule(Mode.TRAINING_LOSS, (1, 2, 3))


def test_uncontrolled_schedule_uses_reference_values():
    schedule = default_schedule(Mode.TRAINING_LOSS, (1, 1, 1, 1), uncontrolled=True)
    assert str(schedule[0].policy.source("roughness")) == "reference"


def test_stage_config_validation():
    with pytest.raises(ConfigurationError):
        StageConfig.create(Stage.ALBEDO, 0)
    with pytest.raises(ConfigurationError):
        StageConfig.create(Stage.ALBEDO, 10, learning_rate=-1.0)
    with pytest.raises(ConfigurationError):
        StageConfig(Stage.ALBEDO, 10, 0.05, default_policy(Stage.RSS), Mode.TRAINING_LOSS)


def test_init_estimate_values(masked_maps):
    maps = init_estimate(6, 6, masked_maps.mask, {"roughness": 0.3})
    assert (maps.roughness[masked_maps.mask] == 0.3).all()
    assert (maps.diffuse[masked_maps.mask] == 0.5).all()
    assert (maps.roughness[~masked_maps.mask] == 0.0).all()
    with pytest.raises(ConfigurationError):
        init_estimate(6, 6, values={"metalness": 0.5})


def test_stages_must_run_in_order(small_scene):
    maps, _ = small_scene
    schedule = [
        StageConfig.create(Stage.RSS, 1, mode=Mode.TRAINING_LOSS),
        StageConfig.create(Stage.GEOMETRY, 1, mode=Mode.TRAINING_LOSS),
    ]
    with pytest.raises(ConfigurationError):
        run_progressive(maps, 0, schedule)


def test_repeated_stage_rejected(small_scene):
    maps, _ = small_scene
    schedule = [StageConfig.create(Stage.ALBEDO, 1, mode=Mode.TRAINING_LOSS)] * 2
    with pytest.raises(ConfigurationError):
        run_progressive(maps, 0, schedule)


def test_zero_rate_leaves_maps_bit_identical(small_scene):
    maps, _ = small_scene
    init = _init_for(maps)
    schedule = default_schedule(Mode.TRAINING_LOSS, (2, 2, 2, 2), 0.0)
    result = run_progressive(maps, 5, schedule, init=init)
    _assert_maps_equal(result.maps, init)


def test_stage_only_touches_its_channels(small_scene):
    maps, _ = small_scene
    init = _init_for(maps)
    cfg = StageConfig.create(Stage.GEOMETRY, 3, 0.05, Mode.TRAINING_LOSS)
    updated, trace, summary = optimize_stage(init, cfg, maps, 1)
    _assert_maps_equal(updated, init, ("diffuse", "roughness", "specular", "sss"))
    assert not np.array_equal(updated.normal, init.normal)
    assert len(trace) == 3
    assert summary.steps == 3
    assert (updated.normal[~maps.mask] == 0.0).all()


def test_results_independent_of_threads(small_scene):
    maps, _ = small_scene
    schedule = default_schedule(Mode.TRAINING_LOSS, (2, 2, 2, 2), 0.05)
    one = run_progressive(maps, 3, schedule, EstimatorSettings(chunk_size=64, threads=1))
    many = run_progressive(maps, 3, schedule, EstimatorSettings(chunk_size=64, threads=4))
    _assert_maps_equal(one.maps, many.maps)
    assert one.trace_rows() == many.trace_rows()


def test_same_seed_same_result(small_scene):
    maps, _ = small_scene
    schedule = default_schedule(Mode.TRAINING_LOSS, (0, 0, 0, 3), 0.05)
    a = run_progressive(maps, 8, schedule)
    b = run_progressive(maps, 8, schedule)
    _assert_maps_equal(a.maps, b.maps)


def test_albedo_stage_reduces_loss(small_scene):
    maps, _ = small_scene
    cfg = StageConfig.create(Stage.ALBEDO, 40, 0.05, Mode.TRAINING_LOSS)
    _, _, summary = optimize_stage(_init_for(maps), cfg, maps, 0)
    assert summary.final_loss < summary.initial_loss


def test_trace_rows_cover_every_step(small_scene):
    maps, _ = small_scene
    result = run_progressive(maps, 0, default_schedule(Mode.TRAINING_LOSS, (2, 1, 0, 3), 0.05))
    rows = result.trace_rows()
    assert [row["stage"] for row in rows] == ["geometry"] * 2 + ["albedo"] + ["finetune"] * 3
    assert [row["step"] for row in rows] == [0, 1, 0, 0, 1, 2]
    assert [s.stage for s in result.summaries] == [Stage.GEOMETRY, Stage.ALBEDO, Stage.FINETUNE]


def test_observation_mode_uses_render_term_only(observations):
    cfg = StageConfig.create(Stage.GEOMETRY, 2, 0.05, Mode.OBSERVATION_ONLY)
    init = init_estimate(observations.width, observations.height, observations.mask)
    _, trace, summary = optimize_stage(init, cfg, observations, 0)
    assert all(report.pixel == 0.0 for report in trace)
    assert all(report.render > 0.0 for report in trace)
    assert summary.initial_loss > 0.0


def test_mode_must_match_target(small_scene, observations):
    maps, _ = small_scene
    init = _init_for(maps)
    with pytest.raises(ConfigurationError):
        optimize_stage(init, StageConfig.create(Stage.ALBEDO, 1, mode=Mode.TRAINING_LOSS), observations, 0)
    with pytest.raises(ConfigurationError):
        optimize_stage(init, StageConfig.create(Stage.ALBEDO, 1, mode=Mode.OBSERVATION_ONLY), maps, 0)


def test_target_must_share_mask(small_scene):
    maps, _ = small_scene
    init = init_estimate(maps.width, maps.height)
    with pytest.raises(DimensionError):
        optimize_stage(init, StageConfig.create(Stage.ALBEDO, 1, mode=Mode.TRAINING_LOSS), maps, 0)


def test_invalid_estimate_rejected(small_scene):
    maps, _ = small_scene
    init = _init_for(maps)
    bad = init.with_channels(roughness=np.where(maps.mask, 1.5, 0.0))
    with pytest.raises(MaterialValidationError):
        optimize_stage(bad, StageConfig.create(Stage.ALBEDO, 1, mode=Mode.TRAINING_LOSS), maps, 0)


def test_empty_mask_is_a_no_op():
    mask = np.zeros((4, 4), dtype=bool)
    target = MaterialMaps.constant(4, 4, mask)
    init = init_estimate(4, 4, mask)
    updated, trace, summary = optimize_stage(init, StageConfig.create(Stage.RSS, 5, mode=Mode.TRAINING_LOSS), target, 0)
    assert trace == []
    assert summary.steps == 0
    _assert_maps_equal(updated, init)


def test_observation_matching_follows_rig_order(observations):
    rig = build_fixed_rig()
    reordered = rig[10:] + rig[:10]
    lights, images = observations.matching(reordered)
    assert lights == reordered
    np.testing.assert_array_equal(images[0], observations.images[10])


def test_observation_matching_reports_missing_light(observations):
    zenith = LightRig([DirectionalLight.create((0.0, 0.0, 1.0), 5.0)])
    with pytest.raises(ConfigurationError):
        observations.matching(build_fixed_rig()[:3] + zenith)


def test_observation_set_shape_checks():
    rig = build_fixed_rig()[:2]
    with pytest.raises(DimensionError):
        ObservationSet(rig, np.zeros((3, 4, 4, 3)), np.ones((4, 4), dtype=bool))
    with pytest.raises(DimensionError):
        ObservationSet(rig, np.zeros((2, 4, 4, 3)), np.ones((5, 4), dtype=bool))
    with pytest.raises(DimensionError):
        ObservationSet(rig, np.zeros((2, 4, 4)), np.ones((4, 4), dtype=bool))


def test_joint_baseline(small_scene):
    maps, _ = small_scene
    result = run_joint_baseline(maps, 2, 3, 0.05)
    assert list(result.traces) == [Stage.FINETUNE]
    assert len(result.traces[Stage.FINETUNE]) == 3


def test_joint_baseline_zero_iterations_returns_init(small_scene):
    maps, _ = small_scene
    init = _init_for(maps)
    result = run_joint_baseline(maps, 2, 0, init=init)
    assert result.maps is init
    with pytest.raises(ParameterError):
        run_joint_baseline(maps, 2, -1)


@pytest.mark.slow
def test_progressive_lowers_every_stage_loss(observations):
    schedule = default_schedule(Mode.OBSERVATION_ONLY, (150, 150, 150, 100), 0.05)
    result = run_progressive(observations, 0, schedule, EstimatorSettings(threads=4))
    for summary in result.summaries:
        assert summary.final_loss < summary.initial_loss
    assert result.summaries[-1].final_loss < result.summaries[0].initial_loss


def test_partial_update_redecodes_only_moved_entries(small_scene):
    maps, _ = small_scene
    state = _PixelState(maps)
    before = {name: value.copy() for name, value in state.values.items()}
    delta = np.zeros((len(state), 3))
    delta[0, 1] = 0.5
    state.apply([3, 4, 5], delta)
    changed = state.values["diffuse"] != before["diffuse"]
    assert changed[0, 1]
    assert changed.sum() == 1
    for name in ("normal", "normal_encoded", "roughness", "specular", "sss", "displacement"):
        np.testing.assert_array_equal(state.values[name], before[name], err_msg=name)


def test_zero_update_changes_nothing(small_scene):
    maps, _ = small_scene
    state = _PixelState(maps)
    before = {name: value.copy() for name, value in state.values.items()}
    state.apply([0, 1, 8], np.zeros((len(state), 3)))
    for name, value in before.items():
        np.testing.assert_array_equal(state.values[name], value, err_msg=name)


@pytest.mark.parametrize("stage", [Stage.ALBEDO, Stage.RSS])
def test_observation_stage_moves_only_its_channels(observations, stage):
    init = init_estimate(observations.width, observations.height, observations.mask)
    cfg = StageConfig.create(stage, 2, 0.05, Mode.OBSERVATION_ONLY)
    updated, trace, _ = optimize_stage(init, cfg, observations, 0)
    assert len(trace) == 2
    untouched = [name for name in CHANNELS if name not in cfg.policy.optimized]
    _assert_maps_equal(updated, init, untouched)
    assert any(not np.array_equal(updated.channel(n), init.channel(n)) for n in cfg.policy.optimized)


@pytest.mark.parametrize("stage", list(Stage))
def test_estimate_equal_to_reference_stays_put(small_scene, stage):
    maps, _ = small_scene
    cfg = StageConfig.create(stage, 3, 0.05, Mode.TRAINING_LOSS)
    updated, trace, summary = optimize_stage(maps, cfg, maps, 4)
    assert [report.total for report in trace] == [0.0] * 3
    assert summary.final_loss == 0.0
    for name in CHANNELS:
        np.testing.assert_allclose(updated.channel(name), maps.channel(name), rtol=0.0, atol=1e-9, err_msg=name)


def _grid_optimum(truth: MaterialMaps, observations: ObservationSet, resolution: int = 512) -> np.ndarray:
    """Per-channel minimiser of the albedo-stage render loss over d = k / resolution."""
    grid = np.arange(resolution + 1) / resolution
    count = len(grid)
    n = truth.decoded_normals()[0, 0]
    radiance = shade_lights(
        tuple(np.full(count, c) for c in n),
        np.repeat(grid[:, None], 3, axis=1),
        np.full(count, truth.roughness[0, 0]),
        np.full(count, truth.specular[0, 0]),
        np.full(count, truth.sss[0, 0]),
        observations.lights.directions(),
        observations.lights.intensities(),
    )
    loss = np.abs(radiance - observations.images[None, :, 0, 0, :]).sum(axis=1)
    return grid[np.argmin(loss, axis=0)]


def test_single_pixel_diffuse_matches_grid_search():
    truth = MaterialMaps.constant(
        1, 1, normal=(0.1, -0.2, 0.97), diffuse=(0.25, 0.5, 0.75), roughness=0.5, specular=0.0, sss=0.0
    )
    observations = render_observations(truth)
    init = truth.with_channels(diffuse=np.full((1, 1, 3), 0.5))
    # reference controls: the loss is minimised by the true diffuse, which lies on the grid
    cfg = StageConfig.create(Stage.ALBEDO, 300, 0.05, Mode.OBSERVATION_ONLY, uncontrolled=True)
    updated, _, _ = optimize_stage(init, cfg, observations, 0)
    best = _grid_optimum(truth, observations)
    np.testing.assert_allclose(best, [0.25, 0.5, 0.75])
    np.testing.assert_allclose(updated.diffuse[0, 0], best, rtol=0.0, atol=1e-3)
