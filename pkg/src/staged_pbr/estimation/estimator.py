"""Staged per-pixel material estimation.

Each stage optimises a subset of channels (see ``STAGE_CHANNELS``) with Adam in
unconstrained parameter space while the remaining channels are rendered from
the stage's control policy. Stages run geometry, albedo, rss, finetune; any of
them may be left out of a schedule.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from staged_pbr.core import dual
from staged_pbr.core.dual import Dual, Number
from staged_pbr.core.gradients import CHANNEL_SLOTS, build_channels, complete_normal, encode_params, shade_channels, slots_for
from staged_pbr.core.lighting import (
    DEFAULT_FIXED_INTENSITY,
    RANDOM_INTENSITY_RANGE,
    LightRig,
    build_fixed_rig,
    sample_random_light,
)
from staged_pbr.core.losses import (
    ControlPolicy,
    LossReport,
    LossWeights,
    SourceKind,
    Stage,
    default_policy,
    uncontrolled_policy,
)
from staged_pbr.core.materials import CHANNELS, COLOR_CHANNELS, MaterialMaps, decode_normals, validate_maps
from staged_pbr.estimation.optimizer import Adam, AdamSettings
from staged_pbr.monitoring.logging import get_logger
from staged_pbr.utils.exceptions import ConfigurationError, DimensionError, MaterialValidationError, ParameterError
from staged_pbr.utils.parallel import map_chunks

logger = get_logger(__name__)

DEFAULT_ITERATIONS = (150, 150, 150, 650)
DEFAULT_LEARNING_RATE = 0.05
MATCH_ANGLE = 1e-5
INIT_VALUES = {"diffuse": 0.5, "roughness": 0.5, "specular": 0.1, "sss": 0.0, "displacement": 0.5}


class Mode(str, Enum):
    TRAINING_LOSS = "training"
    OBSERVATION_ONLY = "observation"


@dataclass(frozen=True)
class StageConfig:
    stage: Stage
    iterations: int
    learning_rate: float
    policy: ControlPolicy
    mode: Mode

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ConfigurationError(f"{self.stage.value}: iterations must be >= 1, got {self.iterations}")
        if self.learning_rate < 0:
            raise ConfigurationError(f"{self.stage.value}: learning rate must be non-negative")
        if self.policy.stage is not self.stage:
            raise ConfigurationError(
                f"policy for {self.policy.stage.value} attached to stage {self.stage.value}"
            )

    @classmethod
    def create(
        cls,
        stage: Stage,
        iterations: int,
        learning_rate: float = DEFAULT_LEARNING_RATE,
        mode: Mode = Mode.OBSERVATION_ONLY,
        uncontrolled: bool = False,
    ) -> "StageConfig":
        stage = Stage(stage)
        policy = uncontrolled_policy(stage) if uncontrolled else default_policy(stage)
        return cls(stage=stage, iterations=int(iterations), learning_rate=float(learning_rate), policy=policy, mode=Mode(mode))


@dataclass
class ObservationSet:
    """Images of the true scene, one per light, plus the foreground mask."""

    lights: LightRig
    images: np.ndarray
    mask: np.ndarray

    def __post_init__(self) -> None:
        self.images = np.asarray(self.images, dtype=np.float64)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.images.ndim != 4 or self.images.shape[-1] != 3:
            raise DimensionError(f"observations must be (K, H, W, 3), got {self.images.shape}")
        if self.images.shape[0] != len(self.lights):
            raise DimensionError(f"{self.images.shape[0]} images for {len(self.lights)} lights")
        if self.images.shape[1:3] != self.mask.shape:
            raise DimensionError(f"mask {self.mask.shape} does not match images {self.images.shape[1:3]}")

    @property
    def width(self) -> int:
        return int(self.mask.shape[1])

    @property
    def height(self) -> int:
        return int(self.mask.shape[0])

    def __len__(self) -> int:
        return len(self.lights)

    def matching(self, rig: LightRig) -> tuple[LightRig, np.ndarray]:
        """Observed lights and images whose directions match the rig, in rig order."""
        observed = self.lights.directions()
        picked: list[int] = []
        for i, light in enumerate(rig):
            cosines = np.clip(observed @ np.asarray(light.direction), -1.0, 1.0)
            hits = np.nonzero(np.arccos(cosines) <= MATCH_ANGLE)[0]
            if len(hits) == 0:
                raise ConfigurationError(f"no observation for rig light {i} with direction {light.direction}")
            picked.append(int(hits[0]))
        return LightRig(self.lights[i] for i in picked), self.images[picked]


Target = Union[MaterialMaps, ObservationSet]


@dataclass(frozen=True)
class StageSummary:
    stage: Stage
    steps: int
    initial_loss: float
    final_loss: float
    seconds: float


@dataclass
class EstimationResult:
    maps: MaterialMaps
    traces: dict[Stage, list[LossReport]] = field(default_factory=dict)
    timings: dict[Stage, float] = field(default_factory=dict)
    summaries: list[StageSummary] = field(default_factory=list)

    def trace_rows(self) -> list[dict[str, object]]:
        rows: list[dict[str, object]] = []
        for stage, reports in self.traces.items():
            rows.extend(report.as_row(stage, step) for step, report in enumerate(reports))
        return rows


@dataclass(frozen=True)
class EstimatorSettings:
    adam: AdamSettings = AdamSettings()
    weights: LossWeights = LossWeights()
    fixed_intensity: float = DEFAULT_FIXED_INTENSITY
    random_intensity: tuple[float, float] = RANDOM_INTENSITY_RANGE
    chunk_size: int = 1024
    threads: int = 1
    log_every: int = 50

    @classmethod
    def from_config(cls, config: Any, threads: Optional[int] = None) -> "EstimatorSettings":
        return cls(
            adam=AdamSettings.from_config(config),
            weights=LossWeights.from_config(config),
            fixed_intensity=float(config.lighting.fixed_intensity),
            random_intensity=(float(config.lighting.random_intensity_min), float(config.lighting.random_intensity_max)),
            chunk_size=int(config.estimator.chunk_size),
            threads=int(config.runtime.threads if threads is None else threads),
        )


def init_estimate(
    width: int,
    height: int,
    mask: Optional[np.ndarray] = None,
    values: Optional[Mapping[str, float]] = None,
) -> MaterialMaps:
    """Flat, mid-range starting maps on the given mask."""
    chosen = {**INIT_VALUES, **(values or {})}
    unknown = set(chosen) - set(INIT_VALUES)
    if unknown:
        raise ConfigurationError(f"unknown init channels: {sorted(unknown)}")
    return MaterialMaps.constant(width, height, mask, normal=(0.0, 0.0, 1.0), **chosen)


def default_schedule(
    mode: Mode = Mode.OBSERVATION_ONLY,
    iterations: Sequence[int] = DEFAULT_ITERATIONS,
    learning_rate: float = DEFAULT_LEARNING_RATE,
    uncontrolled: bool = False,
) -> list[StageConfig]:
    """Stages in order; a stage with zero iterations is left out."""
    if len(iterations) != len(Stage):
        raise ConfigurationError(f"expected {len(Stage)} iteration counts, got {len(iterations)}")
    return [
        StageConfig.create(stage, count, learning_rate, mode, uncontrolled)
        for stage, count in zip(Stage, iterations)
        if count > 0
    ]


class _PixelState:
    """Masked pixels of the maps being estimated, as values plus parameters."""

    def __init__(self, maps: MaterialMaps) -> None:
        self.index = np.nonzero(maps.mask)
        self.values = _pixel_values(maps, self.index)
        v = self.values
        self.t = encode_params(v["normal"], v["diffuse"], v["roughness"], v["specular"], v["sss"], v["displacement"])

    def __len__(self) -> int:
        return int(self.t.shape[0])

    def window(self, start: int, stop: int) -> dict[str, np.ndarray]:
        return {name: value[start:stop] for name, value in self.values.items()}

    def apply(self, slots: Sequence[int], delta: np.ndarray) -> None:
        """Subtract delta from the given slots; only moved entries are re-decoded."""
        moved = delta != 0.0
        self.t[:, slots] -= delta
        moved_by_slot = {slot: moved[:, k] for k, slot in enumerate(slots)}
        still = np.zeros(len(self), dtype=bool)

        normal_moved = moved_by_slot.get(0, still) | moved_by_slot.get(1, still)
        if np.any(normal_moved):
            rows = np.nonzero(normal_moved)[0]
            n = dual.stack_last(list(complete_normal(self.t[rows, 0], self.t[rows, 1])))
            self.values["normal"][rows] = n
            self.values["normal_encoded"][rows] = n * 0.5 + 0.5

        for name, slot_list in CHANNEL_SLOTS.items():
            if name == "normal":
                continue
            for component, slot in enumerate(slot_list):
                if slot not in moved_by_slot:
                    continue
                rows = np.nonzero(moved_by_slot[slot])[0]
                if len(rows) == 0:
                    continue
                decoded = dual.logistic(self.t[rows, slot])
                if name in COLOR_CHANNELS:
                    self.values[name][rows, component] = decoded
                else:
                    self.values[name][rows] = decoded

    def write(self, maps: MaterialMaps, channels: Iterable[str]) -> MaterialMaps:
        updated: dict[str, np.ndarray] = {}
        for name in channels:
            buffer = maps.channel(name).copy()
            buffer[self.index] = self.values["normal_encoded" if name == "normal" else name]
            updated[name] = buffer
        return maps.with_channels(**updated)


def _pixel_values(maps: MaterialMaps, index: tuple[np.ndarray, np.ndarray]) -> dict[str, np.ndarray]:
    return {
        "normal": decode_normals(maps.normal)[index],
        "normal_encoded": maps.normal[index].copy(),
        "diffuse": maps.diffuse[index].copy(),
        "roughness": maps.roughness[index].copy(),
        "specular": maps.specular[index].copy(),
        "sss": maps.sss[index].copy(),
        "displacement": maps.displacement[index].copy(),
    }


def _constant(value: float, like: np.ndarray) -> np.ndarray:
    return np.full(like.shape, float(value))


class _StageProblem:
    """Everything one stage needs to evaluate its loss and gradient per chunk."""

    def __init__(
        self,
        cfg: StageConfig,
        state: _PixelState,
        target: Target,
        seed: int,
        settings: EstimatorSettings,
    ) -> None:
        self.cfg = cfg
        self.state = state
        self.seed = seed
        self.settings = settings
        self.policy = cfg.policy
        self.optimized = cfg.policy.optimized
        self.slots = slots_for(self.optimized)

        if cfg.mode is Mode.TRAINING_LOSS:
            self.weights = settings.weights
            self.reference = _pixel_values(target, state.index)
        else:
            # observation-only: no reference maps, render term alone
            self.weights = LossWeights(pixel=0.0, render=1.0)
            self.reference = {name: value.copy() for name, value in state.values.items()}

        # controlled(reference, reference): fixed channels as constants, the rest from the reference.
        # The non-optimized channels of the estimate side are the same arrays.
        self.plain_side = {name: self._source_value(name) for name in CHANNELS}

        if cfg.mode is Mode.TRAINING_LOSS:
            self.fixed_rig = build_fixed_rig(settings.fixed_intensity)
            self.fixed_targets = self._render(self.plain_side, self.fixed_rig) if self.weights.render > 0 else None
        else:
            self.fixed_rig, images = target.matching(build_fixed_rig(settings.fixed_intensity))
            self.fixed_targets = images[(slice(None),) + state.index].transpose(1, 0, 2)

    def _source_value(self, name: str) -> np.ndarray:
        src = self.policy.source(name)
        if src.kind is SourceKind.FIXED:
            return _constant(src.value, self.reference[name])
        return self.reference[name]

    def _render(self, channels: Mapping[str, np.ndarray], rig: LightRig) -> np.ndarray:
        parts = map_chunks(
            lambda a, b: shade_channels({k: v[a:b] for k, v in channels.items()}, rig),
            len(self.state),
            self.settings.chunk_size,
            self.settings.threads,
        )
        return np.concatenate(parts, axis=0)

    def rig_and_targets(self, step: Optional[int]) -> tuple[LightRig, Optional[np.ndarray]]:
        """Rig for a step (None: fixed lights only) and the per-pixel target radiance."""
        if self.cfg.mode is Mode.OBSERVATION_ONLY or step is None:
            return self.fixed_rig, self.fixed_targets
        extra = LightRig([sample_random_light(self.seed, step, self.settings.random_intensity)])
        rig = self.fixed_rig + extra
        if self.fixed_targets is None:
            return rig, None
        return rig, np.concatenate([self.fixed_targets, self._render(self.plain_side, extra)], axis=1)

    def chunk(
        self,
        start: int,
        stop: int,
        rig: LightRig,
        targets: Optional[np.ndarray],
        differentiable: bool,
    ) -> tuple[Optional[np.ndarray], float, np.ndarray]:
        current = self.state.window(start, stop)
        built = build_channels(
            self.state.t[start:stop],
            self.optimized if differentiable else (),
            {name: current[name] for name in CHANNELS},
        )
        loss: Number = 0.0
        pixel_sum = 0.0
        per_light = np.zeros(len(rig))

        if self.weights.pixel > 0:
            terms: list[Number] = []
            for name in self.optimized:
                pred = built[name]
                if name == "normal":
                    encoded = current["normal_encoded"]
                    pred = (pred * 0.5 + 0.5).with_value(encoded) if isinstance(pred, Dual) else encoded
                diff = dual.absolute(pred - self.reference["normal_encoded" if name == "normal" else name][start:stop])
                terms.append(dual.average(diff, axis=1) if name in COLOR_CHANNELS else diff)
            pixel = sum(terms[1:], terms[0]) / len(terms)
            pixel_sum = float(dual.value_of(pixel).sum())
            loss = self.weights.pixel * pixel

        if targets is not None and self.weights.render > 0:
            side: dict[str, Number] = {}
            for name in CHANNELS:
                kind = self.policy.source(name).kind
                if kind is SourceKind.OPTIMIZED:
                    side[name] = built[name]
                else:
                    side[name] = self.plain_side[name][start:stop]
            radiance = shade_channels(side, rig)
            err = dual.average(dual.absolute(radiance - targets[start:stop]), axis=2)
            per_light = dual.value_of(err).sum(axis=0)
            loss = loss + self.weights.render * dual.total(err, axis=1)

        grad = None
        if differentiable:
            width = len(self.slots)
            grad = loss.grad if isinstance(loss, Dual) else np.zeros((stop - start, width))
            grad = np.broadcast_to(grad, (stop - start, width))
        return grad, pixel_sum, per_light

    def evaluate(self, step: Optional[int], differentiable: bool) -> tuple[LossReport, Optional[np.ndarray]]:
        rig, targets = self.rig_and_targets(step)
        count = len(self.state)
        parts = map_chunks(
            lambda a, b: self.chunk(a, b, rig, targets, differentiable),
            count,
            self.settings.chunk_size,
            self.settings.threads,
        )
        pixel_sum = 0.0
        per_light = np.zeros(len(rig))
        for _, chunk_pixel, chunk_lights in parts:
            pixel_sum += chunk_pixel
            per_light = per_light + chunk_lights
        render = 0.0
        for value in per_light / count:
            render += float(value)
        pixel = pixel_sum / count
        as_cpr = self.cfg.mode is Mode.TRAINING_LOSS and self.cfg.stage is not Stage.FINETUNE
        report = LossReport(
            pixel=pixel,
            render=0.0 if as_cpr else render,
            cpr=render if as_cpr else 0.0,
            total=self.weights.pixel * pixel + self.weights.render * render,
            count=count,
        )
        grad = np.concatenate([p[0] for p in parts], axis=0) if differentiable else None
        return report, grad


def _check_target(current: MaterialMaps, target: Target, mode: Mode) -> None:
    if mode is Mode.TRAINING_LOSS and not isinstance(target, MaterialMaps):
        raise ConfigurationError("training-loss mode needs reference material maps")
    if mode is Mode.OBSERVATION_ONLY and not isinstance(target, ObservationSet):
        raise ConfigurationError("observation-only mode needs an observation set")
    if (target.height, target.width) != current.shape or not np.array_equal(target.mask, current.mask):
        raise DimensionError("estimate and target must share dimensions and mask")


def optimize_stage(
    current: MaterialMaps,
    cfg: StageConfig,
    target: Target,
    rig_seed: int,
    settings: EstimatorSettings = EstimatorSettings(),
) -> tuple[MaterialMaps, list[LossReport], StageSummary]:
    """Run one stage; channels the stage does not optimise pass through untouched."""
    violations = validate_maps(current)
    if violations:
        raise MaterialValidationError(violations)
    _check_target(current, target, cfg.mode)

    started = time.monotonic()
    log = logger.bind(stage=cfg.stage.value, mode=cfg.mode.value)
    state = _PixelState(current)
    if len(state) == 0:
        log.warning("estimator.stage.empty_mask")
        return current, [], StageSummary(cfg.stage, 0, 0.0, 0.0, 0.0)

    problem = _StageProblem(cfg, state, target, rig_seed, settings)
    initial, _ = problem.evaluate(None, differentiable=False)
    log.info(
        "estimator.stage.start",
        iterations=cfg.iterations,
        learning_rate=cfg.learning_rate,
        pixels=len(state),
        policy=cfg.policy.describe(),
        loss=initial.total,
    )

    adam = Adam((len(state), len(problem.slots)), _with_rate(settings.adam, cfg.learning_rate))
    trace: list[LossReport] = []
    for step in range(cfg.iterations):
        report, grad = problem.evaluate(step, differentiable=True)
        trace.append(report)
        delta = adam.step(state.t[:, problem.slots], grad)
        state.apply(problem.slots, delta)
        if settings.log_every and (step + 1) % settings.log_every == 0:
            log.debug("estimator.step", step=step, total=report.total, pixel=report.pixel, render=report.render_term)

    final, _ = problem.evaluate(None, differentiable=False)
    updated = state.write(current, problem.optimized)
    seconds = time.monotonic() - started
    summary = StageSummary(cfg.stage, cfg.iterations, initial.total, final.total, seconds)
    log.info("estimator.stage.done", steps=cfg.iterations, initial=initial.total, final=final.total, seconds=round(seconds, 3))
    return updated, trace, summary


def _with_rate(settings: AdamSettings, rate: float) -> AdamSettings:
    return AdamSettings(
        learning_rate=rate,
        beta1=settings.beta1,
        beta2=settings.beta2,
        epsilon=settings.epsilon,
        weight_decay=settings.weight_decay,
    )


def _check_order(schedule: Sequence[StageConfig]) -> None:
    orders = [cfg.stage.order for cfg in schedule]
    if any(b <= a for a, b in zip(orders, orders[1:])):
        names = ", ".join(cfg.stage.value for cfg in schedule)
        raise ConfigurationError(f"stages must run in order geometry, albedo, rss, finetune; got {names}")


def run_progressive(
    target: Target,
    seed: int,
    schedule: Sequence[StageConfig],
    settings: EstimatorSettings = EstimatorSettings(),
    init: Optional[MaterialMaps] = None,
) -> EstimationResult:
    """Run the stages in order; each stage starts from the previous one's maps."""
    _check_order(schedule)
    maps = init if init is not None else init_estimate(target.width, target.height, target.mask)
    result = EstimationResult(maps=maps)
    logger.info("estimator.run", stages=[cfg.stage.value for cfg in schedule], seed=seed, threads=settings.threads)
    for cfg in schedule:
        maps, trace, summary = optimize_stage(maps, cfg, target, seed, settings)
        result.traces[cfg.stage] = trace
        result.timings[cfg.stage] = summary.seconds
        result.summaries.append(summary)
    result.maps = maps
    return result


def run_joint_baseline(
    target: Target,
    seed: int,
    iterations: int,
    rate: float = DEFAULT_LEARNING_RATE,
    settings: EstimatorSettings = EstimatorSettings(),
    mode: Optional[Mode] = None,
    init: Optional[MaterialMaps] = None,
) -> EstimationResult:
    """Optimise all six channels at once for the whole iteration budget."""
    if iterations < 0:
        raise ParameterError(f"iterations must be non-negative, got {iterations}")
    if mode is None:
        mode = Mode.TRAINING_LOSS if isinstance(target, MaterialMaps) else Mode.OBSERVATION_ONLY
    if iterations == 0:
        return EstimationResult(maps=init if init is not None else init_estimate(target.width, target.height, target.mask))
    schedule = [StageConfig.create(Stage.FINETUNE, iterations, rate, mode)]
    return run_progressive(target, seed, schedule, settings, init)


__all__ = [
    "Mode",
    "StageConfig",
    "ObservationSet",
    "StageSummary",
    "EstimationResult",
    "EstimatorSettings",
    "DEFAULT_ITERATIONS",
    "init_estimate",
    "default_schedule",
    "optimize_stage",
    "run_progressive",
    "run_joint_baseline",
]
