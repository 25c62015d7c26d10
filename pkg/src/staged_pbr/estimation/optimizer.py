"""Element-wise adaptive-moment optimizer with decoupled weight decay."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

from staged_pbr.utils.exceptions import ParameterError


@dataclass(frozen=True)
class AdamSettings:
    learning_rate: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 0.0

    def __post_init__(self) -> None:
        if self.learning_rate < 0:
            raise ParameterError(f"learning rate must be non-negative, got {self.learning_rate}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ParameterError(f"betas must lie in [0, 1), got ({self.beta1}, {self.beta2})")
        if self.epsilon <= 0 or self.weight_decay < 0:
            raise ParameterError("epsilon must be positive and weight decay non-negative")

    @classmethod
    def from_config(cls, config: Any, learning_rate: Optional[float] = None) -> "AdamSettings":
        section = config.estimator
        return cls(
            learning_rate=float(section.learning_rate if learning_rate is None else learning_rate),
            beta1=float(section.beta1),
            beta2=float(section.beta2),
            epsilon=float(section.epsilon),
            weight_decay=float(section.weight_decay),
        )


class Adam:
    """Adam over a fixed-shape parameter array; every element is independent.

    ``step`` returns the update to subtract instead of mutating the caller's
    array, so entries whose update is exactly zero can be left untouched.
    """

    def __init__(self, shape: tuple[int, ...], settings: AdamSettings = AdamSettings()) -> None:
        self.settings = settings
        self.t = 0
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        """Take a gradient step and return the delta (params_new = params - delta)."""
        cfg = self.settings
        self.t += 1
        lr_t = cfg.learning_rate * np.sqrt(1.0 - cfg.beta2**self.t) / (1.0 - cfg.beta1**self.t)
        self.m = cfg.beta1 * self.m + (1.0 - cfg.beta1) * grad
        self.v = cfg.beta2 * self.v + (1.0 - cfg.beta2) * np.square(grad)
        delta = lr_t * self.m / (np.sqrt(self.v) + cfg.epsilon)
        if cfg.weight_decay > 0:
            delta = delta + cfg.learning_rate * cfg.weight_decay * params
        return delta


__all__ = ["Adam", "AdamSettings"]
