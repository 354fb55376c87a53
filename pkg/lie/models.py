from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from autodiff.derivatives import directional_derivative
from autodiff.models import SmoothFn

DOMAIN_KINDS = ('state', 'configuration')


@dataclass(frozen=True)
class OutputMap:
    """
    Output ``y`` with ``p`` components and a claimed relative degree ``gamma``.

    Configuration outputs take ``q`` only; on a state ``x = (q, qd)`` they
    read the first ``y.arity`` entries. ``indices`` and ``linear`` record
    outputs that are coordinate selections or linear maps, whose rates are
    read off without differentiating ``y``.
    """
    p: int
    y: SmoothFn
    gamma: int
    domain_kind: str = 'state'
    name: str = ''
    indices: tuple = ()
    linear: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.domain_kind not in DOMAIN_KINDS:
            raise ValueError(f'domain_kind must be one of {DOMAIN_KINDS}, got {self.domain_kind!r}.')
        if self.y.codomain != (self.p,):
            raise ValueError(f'Output function returns {self.y.codomain}, expected ({self.p},).')
        if self.gamma < 1:
            raise ValueError('Relative degree must be at least 1.')

    def on_state(self, x):
        if self.domain_kind == 'configuration':
            return self.y(x[:self.y.arity])
        return self.y(x)

    def velocity(self, q, v):
        """``dy/dq(q) v``."""
        if self.indices:
            return np.array([v[i] for i in self.indices])
        if self.linear is not None:
            return self.linear @ v
        return directional_derivative(self.y, q, v)

    def state_velocity(self, x, v):
        """Rate of ``on_state`` at ``x`` along the state direction ``v``."""
        if self.domain_kind == 'configuration':
            k = self.y.arity
            return self.velocity(x[:k], v[:k])
        return self.velocity(x, v)

    def state_fn(self, n: int) -> SmoothFn:
        return SmoothFn(n, (self.p,), self.on_state, name=self.name or self.y.name)


def coordinate_output(indices, arity: int, gamma: int, domain_kind: str = 'state', name: str = '') -> OutputMap:
    """Output picking the coordinates ``indices`` out of the input vector."""
    indices = tuple(int(i) for i in indices)
    y = SmoothFn(arity, (len(indices),), lambda x: np.array([x[i] for i in indices]),
                 name=name or f'coordinates{list(indices)}')
    return OutputMap(len(indices), y, gamma, domain_kind, name=y.name, indices=indices)


def actuated_output(B, name: str = 'B^T q') -> OutputMap:
    """The output ``y(q) = B^T q`` of a system with constant actuation matrix ``B``."""
    B = np.asarray(B, dtype=float)
    n, m = B.shape
    y = SmoothFn(n, (m,), lambda q: B.T @ q, name=name)
    return OutputMap(m, y, 2, 'configuration', name=name, linear=B.T)


@dataclass(frozen=True)
class OutputCoordinates:
    """Stacked ``eta = (eta_1, ..., eta_gamma)``, ``eta_i = L_f^{i-1} y``."""
    eta: np.ndarray
    p: int
    gamma: int

    def level(self, i: int):
        """``eta_i`` for ``i`` in ``1..gamma``."""
        return self.eta[self.p * (i - 1):self.p * i]

    def zeta(self, j: int):
        """``zeta_j = (eta_1, ..., eta_j)``."""
        return self.eta[:self.p * j]


@dataclass(frozen=True)
class RankReport:
    sampled_points: int
    min_singular_value: float
    rank_ok: bool
    witnesses: list = field(default_factory=list)
    zero_ok: bool = True
    max_zero_norm: float = 0.0
    tolerance: float = 0.0
    argmin: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.rank_ok and self.zero_ok
