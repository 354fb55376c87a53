"""
Lie derivatives built by nesting directional derivatives.

``L_f^i y`` is the directional derivative of ``L_f^{i-1} y`` along ``f(x)``,
so every level stays a generic-scalar function and can be differentiated
again (the barrier gradient needs one level more than the controller).
"""
import numpy as np

from autodiff.derivatives import directional_derivative, pushforward
from autodiff.linalg import solve
from autodiff.models import SmoothFn
from systems.dynamics import checked_inertia

from .models import OutputCoordinates, OutputMap


def lie_f(sys, y: OutputMap, order: int) -> SmoothFn:
    if order < 0:
        raise ValueError('Lie derivative order must be non-negative.')
    base = y.state_fn(sys.n)
    if order == 0:
        return base
    if order == 1:
        return SmoothFn(sys.n, (y.p,), lambda x: y.state_velocity(x, sys.f(x)), name=f'L_f {base.name}')
    previous = lie_f(sys, y, order - 1)

    def evaluate(x):
        return directional_derivative(previous, x, sys.f(x))

    return SmoothFn(sys.n, (y.p,), evaluate, name=f'L_f^{order} {base.name}')


def lie_g_lie_f(sys, y: OutputMap, order: int) -> SmoothFn:
    """The ``p x m`` matrix ``L_g L_f^order y``."""
    level = lie_f(sys, y, order)

    def evaluate(x):
        return pushforward(level, x, sys.g(x))[1]

    return SmoothFn(sys.n, (y.p, sys.m), evaluate, name=f'L_g L_f^{order} {level.name}')


def lie_rates(sys, y: OutputMap, order: int) -> SmoothFn:
    """
    ``[L_f^(order+1) y | L_g L_f^order y]`` as one ``p x (1 + m)`` matrix.

    Both blocks are rates of the same level, so one pass along the columns
    of ``[f(x) g(x)]`` gives them together.
    """
    level = lie_f(sys, y, order)

    def evaluate(x):
        return pushforward(level, x, np.column_stack([sys.f(x), sys.g(x)]))[1]

    return SmoothFn(sys.n, (y.p, 1 + sys.m), evaluate, name=f'[L_f | L_g] L_f^{order} {level.name}')


def decoupling_matrix(sys, y: OutputMap) -> SmoothFn:
    """``A(q) = dy/dq D(q)^-1 B(q)`` for a configuration output of a Lagrangian system."""
    if y.domain_kind != 'configuration' or y.y.arity != sys.n:
        raise ValueError('The decoupling matrix needs an output of the configuration only.')

    def evaluate(q):
        return pushforward(y.y, q, solve(checked_inertia(sys, q), sys.B(q)))[1]

    return SmoothFn(sys.n, (y.p, sys.m), evaluate, name=f'A(q) {y.name}')


def output_coordinate_fn(sys, y: OutputMap) -> SmoothFn:
    """``x -> eta(x)`` stacked into one vector of length ``p * gamma``."""
    levels = [lie_f(sys, y, i) for i in range(y.gamma)]

    def evaluate(x):
        return np.concatenate([level(x) for level in levels])

    return SmoothFn(sys.n, (y.p * y.gamma,), evaluate, name=f'eta {y.name}')


def output_coordinates(sys, y: OutputMap, x) -> OutputCoordinates:
    return OutputCoordinates(output_coordinate_fn(sys, y)(x), y.p, y.gamma)
