from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from autodiff.dual import primal_array
from autodiff.linalg import as_array
from autodiff.models import SmoothFn
from core.exceptions import DimensionMismatch, NonFiniteValue

from .domains import Box


def _expect(fn: SmoothFn, arity: int, codomain: tuple, what: str):
    if fn.arity != arity or fn.codomain != codomain:
        raise DimensionMismatch(
            f'{what} must map R^{arity} to shape {codomain}, got R^{fn.arity} -> {fn.codomain}.',
            expected=(arity, codomain), got=(fn.arity, fn.codomain))


@dataclass(frozen=True)
class ControlAffineSystem:
    """``xdot = f(x) + g(x) u`` on a box of states."""
    n: int
    m: int
    f: SmoothFn
    g: SmoothFn
    state_domain: Box
    name: str = ''

    def __post_init__(self):
        _expect(self.f, self.n, (self.n,), 'Drift f')
        _expect(self.g, self.n, (self.n, self.m), 'Actuation g')
        if self.state_domain.dim != self.n:
            raise DimensionMismatch('State domain does not match the state dimension.',
                                    expected=self.n, got=self.state_domain.dim)

    def field(self, x, u):
        u = np.atleast_1d(as_array(u))
        if u.shape != (self.m,):
            raise DimensionMismatch(f'Input must have length {self.m}, got shape {u.shape}.',
                                    expected=self.m, got=u.shape)
        return self.f(x) + self.g(x) @ u

    def check_domain(self, points) -> int:
        """
        Evaluate f and g at every point and return how many were checked.

        Raises ``NonFiniteValue`` naming the first state where either field is
        not finite; bad shapes raise ``DimensionMismatch``.
        """
        count = 0
        for x in points:
            try:
                self.f(x)
                self.g(x)
            except NonFiniteValue as exc:
                state = np.asarray(x, dtype=float).tolist()
                raise NonFiniteValue(f'{self.name or "System"} is not finite at {state}: {exc.detail}',
                                     **{**exc.context, 'state': state})
            count += 1
        return count


@dataclass(frozen=True)
class LagrangianSystem:
    """``D(q) qdd + C(q, qd) qd + G(q) = B(q) u``."""
    n: int
    m: int
    D: SmoothFn
    C: SmoothFn
    G: SmoothFn
    B: SmoothFn
    configuration_domain: Box
    name: str = ''

    def __post_init__(self):
        _expect(self.D, self.n, (self.n, self.n), 'Inertia D')
        _expect(self.C, 2 * self.n, (self.n, self.n), 'Coriolis C')
        _expect(self.G, self.n, (self.n,), 'Potential G')
        _expect(self.B, self.n, (self.n, self.m), 'Actuation B')
        if self.configuration_domain.dim != self.n:
            raise DimensionMismatch('Configuration domain does not match the configuration dimension.',
                                    expected=self.n, got=self.configuration_domain.dim)

    def accelerations(self, q, qd, u) -> np.ndarray:
        """Reference ``qdd`` from a direct float solve of the equations of motion."""
        q, qd, u = (np.asarray(v, dtype=float) for v in (q, qd, u))
        D = primal_array(self.D(q))
        rhs = primal_array(self.B(q)) @ u - primal_array(self.C(np.concatenate([q, qd]))) @ qd - primal_array(self.G(q))
        return np.linalg.solve(D, rhs)

    def min_inertia_eigenvalue(self, configurations) -> float:
        return min(float(np.min(np.linalg.eigvalsh(primal_array(self.D(q))))) for q in configurations)


@dataclass(frozen=True)
class ModelZooEntry:
    name: str
    build: Callable = field(repr=False, compare=False)
    default_params: dict = field(default_factory=dict)
    units: dict = field(default_factory=dict)
    description: str = ''
    lagrangian: bool = True

    def system(self, params=None):
        return self.build(self.resolve_params(params))

    def resolve_params(self, overrides=None) -> dict:
        params = dict(self.default_params)
        params.update(overrides or {})
        return params
