import numpy as np

from autodiff.dual import primal_array
from autodiff.linalg import as_array, solve
from autodiff.models import SmoothFn
from core.conf import barrier_settings
from core.exceptions import DimensionMismatch, SingularInertia

from .domains import Box
from .models import ControlAffineSystem, LagrangianSystem


def velocity_box(n: int, limit: float) -> Box:
    return Box((-limit,) * n, (limit,) * n, tuple(f'qd{i + 1}' for i in range(n)))


def checked_inertia(sys: LagrangianSystem, q):
    """Evaluate ``D(q)`` and refuse it when its condition number is too large."""
    Dq = sys.D(q)
    cond = np.linalg.cond(primal_array(Dq))
    if not np.isfinite(cond) or cond > barrier_settings.INERTIA_CONDITION_LIMIT:
        raise SingularInertia(f'Inertia of {sys.name or "system"} has condition number {cond:.3e}.',
                              configuration=primal_array(q).tolist(), condition_number=float(cond))
    return Dq


def to_control_affine(sys: LagrangianSystem, velocity_limit=None) -> ControlAffineSystem:
    """
    Rewrite ``D qdd + C qd + G = B u`` with state ``x = (q, qd)``.

    The drift is ``(qd, -D^-1 (C qd + G))`` and the actuation ``(0, D^-1 B)``.
    Both go through ``autodiff.linalg.solve`` so they can be differentiated.
    """
    n, m = sys.n, sys.m
    limit = barrier_settings.VELOCITY_LIMIT if velocity_limit is None else velocity_limit

    def drift(x):
        q, qd = x[:n], x[n:]
        rhs = sys.C(x) @ qd + sys.G(q)
        qdd = -solve(checked_inertia(sys, q), rhs)
        return np.concatenate([qd, qdd])

    def actuation(x):
        q = x[:n]
        lower = solve(checked_inertia(sys, q), sys.B(q))
        return np.vstack([np.zeros((n, m)), lower])

    label = sys.name or 'lagrangian'
    return ControlAffineSystem(
        n=2 * n,
        m=m,
        f=SmoothFn(2 * n, (2 * n,), drift, name=f'{label} drift'),
        g=SmoothFn(2 * n, (2 * n, m), actuation, name=f'{label} actuation'),
        state_domain=sys.configuration_domain.product(velocity_box(n, limit)),
        name=label,
    )


def closed_loop_field(sys: ControlAffineSystem, k) -> SmoothFn:
    """The vector field ``x -> f(x) + g(x) k(x)``."""
    def field(x):
        u = np.atleast_1d(as_array(k(x)))
        if u.shape != (sys.m,):
            raise DimensionMismatch(f'Feedback must return {sys.m} inputs, got shape {u.shape}.',
                                    expected=sys.m, got=u.shape)
        return sys.f(x) + sys.g(x) @ u

    return SmoothFn(sys.n, (sys.n,), field, name=f'{sys.name or "system"} closed loop')
