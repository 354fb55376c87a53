"""Axis-aligned boxes and the sampling plans drawn over them."""
from dataclasses import dataclass, field
import itertools
import math

import numpy as np
from scipy.stats import qmc

from core.exceptions import DimensionMismatch

SAMPLING_METHODS = ('grid', 'lhs')


@dataclass(frozen=True)
class Box:
    low: tuple
    high: tuple
    names: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, 'low', tuple(float(v) for v in self.low))
        object.__setattr__(self, 'high', tuple(float(v) for v in self.high))
        object.__setattr__(self, 'names', tuple(self.names))
        if len(self.low) != len(self.high):
            raise DimensionMismatch('Box bounds differ in length.', low=self.low, high=self.high)
        if self.names and len(self.names) != len(self.low):
            raise DimensionMismatch('Box names do not match its dimension.', names=self.names)
        if any(lo > hi for lo, hi in zip(self.low, self.high)):
            raise ValueError(f'Box has low > high: {self.low} / {self.high}')

    @property
    def dim(self) -> int:
        return len(self.low)

    @property
    def width(self) -> np.ndarray:
        return np.array(self.high) - np.array(self.low)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (np.array(self.low) + np.array(self.high))

    def inflate(self, fraction: float) -> 'Box':
        """Grow every side outwards by ``fraction`` of that side's width."""
        pad = fraction * self.width
        return Box(np.array(self.low) - pad, np.array(self.high) + pad, self.names)

    def clip(self, other: 'Box') -> 'Box':
        """Intersection with ``other``."""
        low = np.maximum(self.low, other.low)
        high = np.minimum(self.high, other.high)
        return Box(low, np.maximum(low, high), self.names or other.names)

    def around(self, center, half_width) -> 'Box':
        """Box of the given half widths around ``center``, kept inside this box."""
        center = np.asarray(center, dtype=float)
        return Box(center - half_width, center + half_width, self.names).clip(self)

    def replace(self, indices, low, high) -> 'Box':
        new_low, new_high = list(self.low), list(self.high)
        for i, lo, hi in zip(indices, low, high):
            new_low[i], new_high[i] = lo, hi
        return Box(new_low, new_high, self.names)

    def product(self, other: 'Box') -> 'Box':
        return Box(self.low + other.low, self.high + other.high,
                   self.names + other.names if self.names and other.names else ())

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= np.array(self.low)) and np.all(x <= np.array(self.high)))


@dataclass(frozen=True)
class SamplingPlan:
    box: Box
    count: int
    method: str = 'lhs'
    seed: int = 0

    def __post_init__(self):
        if self.method not in SAMPLING_METHODS:
            raise ValueError(f'Unknown sampling method {self.method!r}; use one of {SAMPLING_METHODS}.')
        if self.count < 1:
            raise ValueError('Sampling plan needs at least one point.')

    def points(self) -> np.ndarray:
        """
        Sample points, one per row.

        ``grid`` places ``ceil(count ** (1/dim))`` points per axis (so it may
        return more than ``count``); ``lhs`` returns exactly ``count`` Latin
        hypercube points drawn with the plan's seed.
        """
        if self.method == 'grid':
            per_axis = max(2, math.ceil(self.count ** (1.0 / self.box.dim)))
            axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(self.box.low, self.box.high)]
            return np.array(list(itertools.product(*axes)), dtype=float)
        return latin_hypercube(self.box, self.count, self.seed)

    def with_box(self, box: Box) -> 'SamplingPlan':
        return SamplingPlan(box, self.count, self.method, self.seed)


def latin_hypercube(box: Box, count: int, seed: int) -> np.ndarray:
    sampler = qmc.LatinHypercube(d=box.dim, rng=np.random.default_rng(seed))
    unit = sampler.random(count)
    width = box.width
    # qmc.scale rejects zero-width axes, which appear when a box is pinned to a point.
    return np.array(box.low) + unit * width
