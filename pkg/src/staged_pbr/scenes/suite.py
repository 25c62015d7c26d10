"""Paired progressive and joint estimation on generated scenes, scored against ground truth."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional, Sequence

from staged_pbr.core.materials import MaterialMaps, RegionLabels
from staged_pbr.core.shader import CameraModel
from staged_pbr.estimation.estimator import (
    DEFAULT_ITERATIONS,
    DEFAULT_LEARNING_RATE,
    EstimationResult,
    EstimatorSettings,
    Mode,
    default_schedule,
    run_joint_baseline,
    run_progressive,
)
from staged_pbr.monitoring.logging import get_logger
from staged_pbr.monitoring.metrics import EvalReport, eval_report, heldout_rig
from staged_pbr.scenes.scenegen import SceneSpec, generate_scene, render_observations

logger = get_logger(__name__)


@dataclass
class SceneComparison:
    """Both runs of one seed; they share observations, init and step budget."""

    seed: int
    truth: MaterialMaps
    labels: RegionLabels
    progressive: EstimationResult
    joint: EstimationResult
    progressive_report: EvalReport
    joint_report: EvalReport
    progressive_seconds: float
    joint_seconds: float

    @property
    def margin(self) -> float:
        """Progressive minus joint mean material PSNR in dB."""
        return self.progressive_report.material_mean - self.joint_report.material_mean

    def as_row(self) -> dict[str, object]:
        return {
            "seed": self.seed,
            "progressive_mean": self.progressive_report.material_mean,
            "joint_mean": self.joint_report.material_mean,
            "margin": self.margin,
            "progressive_seconds": self.progressive_seconds,
            "joint_seconds": self.joint_seconds,
        }


def compare_on_scene(
    spec: SceneSpec,
    iterations: Sequence[int] = DEFAULT_ITERATIONS,
    learning_rate: float = DEFAULT_LEARNING_RATE,
    settings: EstimatorSettings = EstimatorSettings(),
    cam: Optional[CameraModel] = None,
    noise_sigma: float = 0.0,
) -> SceneComparison:
    """Generate a scene, estimate it from its fixed-rig observations both ways, score both."""
    cam = cam or CameraModel()
    truth, labels = generate_scene(spec, cam)
    obs = render_observations(
        truth, cam, noise_sigma, spec.seed, fixed_intensity=settings.fixed_intensity, threads=settings.threads
    )
    log = logger.bind(seed=spec.seed, budget=sum(iterations))

    started = time.monotonic()
    schedule = default_schedule(Mode.OBSERVATION_ONLY, iterations, learning_rate)
    progressive = run_progressive(obs, spec.seed, schedule, settings)
    progressive_seconds = time.monotonic() - started

    started = time.monotonic()
    joint = run_joint_baseline(obs, spec.seed, sum(iterations), learning_rate, settings, Mode.OBSERVATION_ONLY)
    joint_seconds = time.monotonic() - started

    heldout = heldout_rig()
    comparison = SceneComparison(
        seed=spec.seed,
        truth=truth,
        labels=labels,
        progressive=progressive,
        joint=joint,
        progressive_report=eval_report(progressive.maps, truth, heldout, cam, threads=settings.threads),
        joint_report=eval_report(joint.maps, truth, heldout, cam, threads=settings.threads),
        progressive_seconds=progressive_seconds,
        joint_seconds=joint_seconds,
    )
    log.info(
        "suite.scene",
        progressive=round(comparison.progressive_report.material_mean, 4),
        joint=round(comparison.joint_report.material_mean, 4),
        margin=round(comparison.margin, 4),
        seconds=round(progressive_seconds + joint_seconds, 1),
    )
    return comparison


__all__ = ["SceneComparison", "compare_on_scene"]
