"""
Output constraints ``psi(y) >= 0``.

Every constructor also returns a box around the zero superlevel set of
``psi``. One sided constraints are unbounded, so they take the other side of
the box from ``region``. Each constructor supplies ``grad psi`` in closed form.
"""
import numpy as np

from autodiff.models import SmoothFn
from systems.domains import Box

from .models import OutputConstraint

CONSTRAINT_KINDS = ('upper_bound', 'lower_bound', 'band', 'ellipse')


def _as_vector(value, p=None) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if p is not None and arr.shape != (p,):
        arr = np.full(p, float(arr[0])) if arr.shape == (1,) else arr
    return arr


def upper_bound(limit: float, low: float, name: str = '') -> OutputConstraint:
    """``psi(y) = limit - y`` for a scalar output; the set is ``[low, limit]``."""
    psi = SmoothFn(1, (), lambda y: limit - y[0], name=name or f'{limit} - y')
    grad = SmoothFn(1, (1,), lambda y: np.array([-1.0]), name=f'grad {psi.name}')
    return OutputConstraint(psi, Box((low,), (limit,)), name=psi.name, kind='upper_bound',
                            params={'limit': limit, 'low': low}, grad=grad)


def lower_bound(limit: float, high: float, name: str = '') -> OutputConstraint:
    """``psi(y) = y - limit`` for a scalar output; the set is ``[limit, high]``."""
    psi = SmoothFn(1, (), lambda y: y[0] - limit, name=name or f'y - {limit}')
    grad = SmoothFn(1, (1,), lambda y: np.array([1.0]), name=f'grad {psi.name}')
    return OutputConstraint(psi, Box((limit,), (high,)), name=psi.name, kind='lower_bound',
                            params={'limit': limit, 'high': high}, grad=grad)


def band(center, radius: float, name: str = '') -> OutputConstraint:
    """``psi(y) = r^2 - |c - y|^2``: a band around ``c`` for scalar outputs, a ball otherwise."""
    center = _as_vector(center)
    p = center.shape[0]

    c = center.tolist()

    def evaluate(y):
        total = 0.0
        for i in range(p):
            d = c[i] - y[i]
            total = total + d * d
        return radius * radius - total

    psi = SmoothFn(p, (), evaluate, name=name or f'band({center.tolist()}, {radius})')
    grad = SmoothFn(p, (p,), lambda y: np.array([2.0 * (c[i] - y[i]) for i in range(p)]),
                    name=f'grad {psi.name}')
    return OutputConstraint(psi, Box(center - radius, center + radius), name=psi.name, kind='band',
                            params={'center': center.tolist(), 'radius': radius}, grad=grad)


def ellipse(center, radii, name: str = '') -> OutputConstraint:
    """``psi(y) = 1 - sum(((y_i - c_i) / r_i)^2)``, an axis aligned ellipse."""
    center = _as_vector(center)
    p = center.shape[0]
    radii = _as_vector(radii, p)
    if np.any(radii <= 0):
        raise ValueError('Ellipse radii must be positive.')

    c, r = center.tolist(), radii.tolist()

    def evaluate(y):
        total = 0.0
        for i in range(p):
            d = (y[i] - c[i]) / r[i]
            total = total + d * d
        return 1.0 - total

    psi = SmoothFn(p, (), evaluate, name=name or f'ellipse({center.tolist()}, {radii.tolist()})')
    grad = SmoothFn(p, (p,), lambda y: np.array([-2.0 * (y[i] - c[i]) / (r[i] * r[i]) for i in range(p)]),
                    name=f'grad {psi.name}')
    return OutputConstraint(psi, Box(center - radii, center + radii), name=psi.name, kind='ellipse',
                            params={'center': center.tolist(), 'radii': radii.tolist()}, grad=grad)
