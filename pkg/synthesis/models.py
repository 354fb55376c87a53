from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from autodiff import elementary as el
from autodiff.derivatives import gradient, pushforward
from autodiff.models import SmoothFn
from core.conf import barrier_settings
from lie.models import OutputMap, RankReport
from systems.domains import Box
from systems.models import ControlAffineSystem

ALPHA_KINDS = ('linear', 'arctan')


@dataclass(frozen=True)
class ClassKInfinity:
    """
    Extended class K-infinity function.

    ``linear`` is ``c r``; ``arctan`` is ``c r + arctan(r)``. Both are smooth
    and globally Lipschitz.
    """
    kind: str = 'linear'
    slope: float = 1.0

    def __post_init__(self):
        if self.kind not in ALPHA_KINDS:
            raise ValueError(f'Unknown class K-infinity kind {self.kind!r}; use one of {ALPHA_KINDS}.')
        if not self.slope > 0:
            raise ValueError('Class K-infinity slope must be positive.')

    def __call__(self, r):
        if self.kind == 'arctan':
            return self.slope * r + el.arctan(r)
        return self.slope * r

    @property
    def lipschitz_constant(self) -> float:
        return self.slope + 1.0 if self.kind == 'arctan' else self.slope


@dataclass(frozen=True)
class OutputConstraint:
    """``psi(y) >= 0`` on the output space, with a bounding box of its zero superlevel set."""
    psi: SmoothFn
    c1_box: Box
    name: str = ''
    kind: str = ''
    params: dict = field(default_factory=dict)
    grad: Optional[SmoothFn] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.psi.is_scalar:
            raise ValueError('Constraint psi must be scalar valued.')
        if self.grad is not None and (self.grad.arity, self.grad.codomain) != (self.psi.arity, (self.psi.arity,)):
            raise ValueError('Constraint gradient does not match the output dimension.')
        if self.c1_box.dim != self.psi.arity:
            raise ValueError('Constraint box does not match the output dimension.')

    @property
    def p(self) -> int:
        return self.psi.arity

    @property
    def d1_domain(self) -> Box:
        return self.c1_box.inflate(barrier_settings.D1_INFLATION)

    def gradient(self, y):
        """``grad psi(y)``, from the closed form when the constructor supplied one."""
        if self.grad is not None:
            return self.grad(y)
        return gradient(self.psi, y)


@dataclass(frozen=True)
class ConditionReport:
    """Outcome of a sampled inequality check: margins and the states that fail it."""
    sampled: int
    accepted: int
    min_margin: float
    violations: int
    witnesses: list = field(default_factory=list)
    name: str = ''

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.accepted > 0


@dataclass(frozen=True)
class CbfCandidate:
    """
    A backstepped barrier ``h`` with everything used to build it.

    ``chain`` holds the virtual controllers ``k_1 .. k_{gamma-1}``; ``target``
    is the last step of the recursion, the value the top output derivative
    is driven to by the explicit controller.
    """
    system: ControlAffineSystem
    output: OutputMap
    constraint: OutputConstraint
    alpha: ClassKInfinity
    mu: tuple
    lam: tuple
    sigma: float
    chain: tuple
    target: SmoothFn
    barrier: SmoothFn
    form: str = 'general'
    rank_report: Optional[RankReport] = None

    @property
    def gamma(self) -> int:
        return self.output.gamma

    def h(self, x) -> float:
        return self.barrier(x)

    def gradient(self, x):
        return gradient(self.barrier, x)

    def lie_derivatives(self, x, drift=None, actuation=None):
        """
        ``(h, L_f h, L_g h)`` at ``x`` from one pass along ``[f(x) g(x)]``.

        Callers that already evaluated the vector fields at ``x`` pass them
        as ``drift`` and ``actuation``.
        """
        x = np.asarray(x, dtype=float)
        drift = self.system.f(x) if drift is None else drift
        actuation = self.system.g(x) if actuation is None else actuation
        h, rates = pushforward(self.barrier, x, np.column_stack([drift, actuation]))
        return h, rates[0], rates[1:]

    @cached_property
    def output_constraint(self) -> SmoothFn:
        """``psi(y(x))`` on the state space."""
        return self.constraint.psi.compose(self.output.state_fn(self.system.n),
                                           name=f'psi[{self.constraint.name}](y)')

    def psi_value(self, x) -> float:
        return self.output_constraint(x)
