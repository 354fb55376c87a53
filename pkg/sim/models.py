from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from filters.models import FilterDecision
from lie.models import OutputMap
from synthesis.models import ClassKInfinity, OutputConstraint


@dataclass(frozen=True)
class Gains:
    alpha: ClassKInfinity = field(default_factory=ClassKInfinity)
    mu: tuple = (1.0,)
    lam: tuple = ()
    sigma: float = 1.0

    def lambdas(self, gamma: int) -> tuple:
        """``lam`` when given, otherwise the smallest admissible value at every level."""
        return tuple(self.lam) if self.lam else (self.alpha.lipschitz_constant,) * (gamma - 1)


@dataclass(frozen=True)
class Scenario:
    name: str
    model: str
    params: dict
    system: object = field(repr=False)
    output: OutputMap = field(repr=False)
    constraint: OutputConstraint = field(repr=False)
    gains: Gains
    nominal: Callable = field(repr=False)
    initial_state: tuple
    horizon: float
    dt: float
    filter_enabled: bool = True
    seed: int = 0


@dataclass(frozen=True)
class TrajectoryLog:
    """
    Closed loop run on the grid ``t_k = k dt``; row ``k`` holds the decision taken at ``t_k``.

    ``final_decision`` is the filter decision at the last grid point.
    """
    times: np.ndarray
    states: np.ndarray
    u_desired: np.ndarray
    u_safe: np.ndarray
    h: np.ndarray
    psi: np.ndarray
    active: np.ndarray
    state_names: tuple = ()
    final_decision: Optional[FilterDecision] = None

    def __len__(self) -> int:
        return self.times.shape[0]

    @property
    def header(self) -> list:
        n, m = self.states.shape[1], self.u_safe.shape[1]
        return (['t'] + [f'x{i + 1}' for i in range(n)] + [f'u_des{j + 1}' for j in range(m)]
                + [f'u_safe{j + 1}' for j in range(m)] + ['h', 'psi', 'active'])

    def rows(self):
        for k in range(len(self)):
            yield ([self.times[k], *self.states[k], *self.u_desired[k], *self.u_safe[k],
                    self.h[k], self.psi[k], bool(self.active[k])])


@dataclass(frozen=True)
class InvarianceReport:
    steps: int
    min_h: float
    min_psi: float
    max_violation: float
    active_fraction: float
    psi_dominates_h: bool
    tolerance: float
    final_state: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.min_h >= -self.tolerance and self.min_psi >= -self.tolerance
