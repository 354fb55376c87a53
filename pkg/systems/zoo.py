"""
Named models with their default parameters.

Parameters carry their unit in the key (``pole_length_m``) and can be
overridden from a scenario file. Each ``build`` takes the resolved parameter
dict and returns a system whose matrices are written against generic scalars.
"""
import math

import numpy as np

from autodiff import elementary as el
from autodiff.models import SmoothFn
from core.exceptions import ScenarioConfigError

from .domains import Box
from .models import ControlAffineSystem, LagrangianSystem, ModelZooEntry


# ===== Cart-pole =====
def build_cartpole(p: dict) -> LagrangianSystem:
    mc, mp, l, g = p['cart_mass_kg'], p['pole_mass_kg'], p['pole_length_m'], p['gravity_mps2']

    def inertia(q):
        c = el.cos(q[1])
        return np.array([[mc + mp, mp * l * c], [mp * l * c, mp * l * l]])

    def coriolis(x):
        return np.array([[0.0, -mp * l * x[3] * el.sin(x[1])], [0.0, 0.0]])

    def potential(q):
        return np.array([0.0, mp * g * l * el.sin(q[1])])

    def actuation(q):
        return np.array([[1.0], [0.0]])

    return LagrangianSystem(
        n=2, m=1,
        D=SmoothFn(2, (2, 2), inertia, name='cartpole D'),
        C=SmoothFn(4, (2, 2), coriolis, name='cartpole C'),
        G=SmoothFn(2, (2,), potential, name='cartpole G'),
        B=SmoothFn(2, (2, 1), actuation, name='cartpole B'),
        configuration_domain=Box((-3.0, -math.pi), (3.0, math.pi), ('x', 'theta')),
        name='cartpole',
    )


# ===== Planar quadrotor =====
def build_planar_quadrotor(p: dict) -> LagrangianSystem:
    m, inertia_zz, g = p['mass_kg'], p['inertia_kgm2'], p['gravity_mps2']

    def inertia(q):
        return np.diag([m, m, inertia_zz])

    def coriolis(x):
        return np.zeros((3, 3))

    def potential(q):
        return np.array([0.0, m * g, 0.0])

    def actuation(q):
        return np.array([[el.sin(q[2]), 0.0], [el.cos(q[2]), 0.0], [0.0, -1.0]])

    return LagrangianSystem(
        n=3, m=2,
        D=SmoothFn(3, (3, 3), inertia, name='quadrotor D'),
        C=SmoothFn(6, (3, 3), coriolis, name='quadrotor C'),
        G=SmoothFn(3, (3,), potential, name='quadrotor G'),
        B=SmoothFn(3, (3, 2), actuation, name='quadrotor B'),
        configuration_domain=Box((-2.0, 0.0, -math.pi), (2.0, 4.0, math.pi), ('x', 'z', 'theta')),
        name='planar_quadrotor',
    )


# ===== Two-link arm =====
def build_two_link_arm(p: dict) -> LagrangianSystem:
    m1, m2 = p['link1_mass_kg'], p['link2_mass_kg']
    l1 = p['link1_length_m']
    lc1, lc2 = p['link1_com_m'], p['link2_com_m']
    i1, i2 = p['link1_inertia_kgm2'], p['link2_inertia_kgm2']
    g = p['gravity_mps2']

    def inertia(q):
        c2 = el.cos(q[1])
        d11 = m1 * lc1 ** 2 + m2 * (l1 ** 2 + lc2 ** 2 + 2 * l1 * lc2 * c2) + i1 + i2
        d12 = m2 * (lc2 ** 2 + l1 * lc2 * c2) + i2
        d22 = m2 * lc2 ** 2 + i2
        return np.array([[d11, d12], [d12, d22]])

    def coriolis(x):
        h = -m2 * l1 * lc2 * el.sin(x[1])
        return np.array([[h * x[3], h * (x[2] + x[3])], [-h * x[2], 0.0]])

    def potential(q):
        c12 = el.cos(q[0] + q[1])
        return np.array([(m1 * lc1 + m2 * l1) * g * el.cos(q[0]) + m2 * lc2 * g * c12, m2 * lc2 * g * c12])

    def actuation(q):
        return np.eye(2)

    return LagrangianSystem(
        n=2, m=2,
        D=SmoothFn(2, (2, 2), inertia, name='arm D'),
        C=SmoothFn(4, (2, 2), coriolis, name='arm C'),
        G=SmoothFn(2, (2,), potential, name='arm G'),
        B=SmoothFn(2, (2, 2), actuation, name='arm B'),
        configuration_domain=Box((-math.pi, -math.pi), (math.pi, math.pi), ('q1', 'q2')),
        name='two_link_arm',
    )


# ===== Integrator chains =====
def integrator_chain(order: int, limit: float, name: str) -> ControlAffineSystem:
    def drift(x):
        return np.concatenate([x[1:], [0.0]])

    def actuation(x):
        col = np.zeros((order, 1))
        col[-1, 0] = 1.0
        return col

    return ControlAffineSystem(
        n=order, m=1,
        f=SmoothFn(order, (order,), drift, name=f'{name} drift'),
        g=SmoothFn(order, (order, 1), actuation, name=f'{name} actuation'),
        state_domain=Box((-limit,) * order, (limit,) * order, tuple(f'x{i + 1}' for i in range(order))),
        name=name,
    )


MODEL_ZOO = {
    entry.name: entry
    for entry in [
        ModelZooEntry(
            name='cartpole',
            build=build_cartpole,
            default_params={'cart_mass_kg': 1.0, 'pole_mass_kg': 0.25, 'pole_length_m': 0.5, 'gravity_mps2': 9.81},
            units={'cart_mass_kg': 'kg', 'pole_mass_kg': 'kg', 'pole_length_m': 'm', 'gravity_mps2': 'm/s^2'},
            description='Pendulum on a cart, q = (x, theta), force on the cart.',
        ),
        ModelZooEntry(
            name='planar_quadrotor',
            build=build_planar_quadrotor,
            default_params={'mass_kg': 1.0, 'inertia_kgm2': 0.01, 'gravity_mps2': 9.81},
            units={'mass_kg': 'kg', 'inertia_kgm2': 'kg m^2', 'gravity_mps2': 'm/s^2'},
            description='Planar quadrotor, q = (x, z, theta), inputs (thrust, moment).',
        ),
        ModelZooEntry(
            name='two_link_arm',
            build=build_two_link_arm,
            default_params={
                'link1_mass_kg': 1.0, 'link2_mass_kg': 1.0,
                'link1_length_m': 1.0,
                'link1_com_m': 0.5, 'link2_com_m': 0.5,
                'link1_inertia_kgm2': 0.083, 'link2_inertia_kgm2': 0.083,
                'gravity_mps2': 9.81,
            },
            units={
                'link1_mass_kg': 'kg', 'link2_mass_kg': 'kg', 'link1_length_m': 'm',
                'link1_com_m': 'm', 'link2_com_m': 'm',
                'link1_inertia_kgm2': 'kg m^2', 'link2_inertia_kgm2': 'kg m^2', 'gravity_mps2': 'm/s^2',
            },
            description='Fully actuated planar two-link arm with B = I.',
        ),
        ModelZooEntry(
            name='single_integrator',
            build=lambda p: integrator_chain(1, p['state_limit'], 'single_integrator'),
            default_params={'state_limit': 2.0},
            description='ydot = u.',
            lagrangian=False,
        ),
        ModelZooEntry(
            name='double_integrator',
            build=lambda p: integrator_chain(2, p['state_limit'], 'double_integrator'),
            default_params={'state_limit': 2.0},
            description='x1dot = x2, x2dot = u.',
            lagrangian=False,
        ),
        ModelZooEntry(
            name='triple_integrator',
            build=lambda p: integrator_chain(3, p['state_limit'], 'triple_integrator'),
            default_params={'state_limit': 2.0},
            description='x1dot = x2, x2dot = x3, x3dot = u.',
            lagrangian=False,
        ),
    ]
}


def get_entry(name: str) -> ModelZooEntry:
    try:
        return MODEL_ZOO[name]
    except KeyError:
        raise ScenarioConfigError(f'Unknown model {name!r}; known models: {", ".join(sorted(MODEL_ZOO))}.',
                                  field='model.name')


def load_model(name: str, overrides=None):
    """Return ``(entry, system, params)`` with ``overrides`` applied on top of the defaults."""
    entry = get_entry(name)
    unknown = sorted(set(overrides or {}) - set(entry.default_params))
    if unknown:
        raise ScenarioConfigError(f'Unknown parameter(s) for {name}: {", ".join(unknown)}.',
                                  field='model.params')
    params = entry.resolve_params(overrides)
    return entry, entry.build(params), params
