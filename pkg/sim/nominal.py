"""Nominal controllers the safety filter sits on top of."""
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ZeroController:
    m: int

    def __call__(self, x):
        return np.zeros(self.m)


@dataclass(frozen=True)
class PdChannel:
    """``u = offset + scale (kp (target - x[position]) - kd x[velocity])``."""
    position_index: int
    velocity_index: int
    target: float = 0.0
    kp: float = 5.0
    kd: float = 2.0
    scale: float = 1.0
    offset: float = 0.0

    def __call__(self, x) -> float:
        error = self.target - x[self.position_index]
        return self.offset + self.scale * (self.kp * error - self.kd * x[self.velocity_index])


@dataclass(frozen=True)
class PdController:
    channels: tuple

    def __call__(self, x):
        return np.array([channel(x) for channel in self.channels], dtype=float)
