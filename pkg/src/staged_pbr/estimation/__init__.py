"""Per-pixel material estimation."""

from staged_pbr.estimation.estimator import EstimationResult, EstimatorSettings, Mode, ObservationSet, StageConfig
from staged_pbr.estimation.optimizer import Adam, AdamSettings

__all__ = ["Adam", "AdamSettings", "EstimationResult", "EstimatorSettings", "Mode", "ObservationSet", "StageConfig"]
