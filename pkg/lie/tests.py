import math

import numpy as np
from django.test import SimpleTestCase

from autodiff.derivatives import directional_derivative
from systems.domains import SamplingPlan
from systems.dynamics import to_control_affine
from systems.models import LagrangianSystem
from systems.zoo import MODEL_ZOO, load_model

from .derivatives import decoupling_matrix, lie_f, lie_g_lie_f, lie_rates, output_coordinates
from .models import actuated_output, coordinate_output
from .serializers import RankReportSerializer
from .verification import verify_relative_degree


def rk4_step(field, x, dt):
    k1 = field(x)
    k2 = field(x + 0.5 * dt * k1)
    k3 = field(x + 0.5 * dt * k2)
    k4 = field(x + dt * k3)
    return x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


class LieDerivativeTests(SimpleTestCase):
    def setUp(self):
        _, self.double, _ = load_model('double_integrator')
        self.y = coordinate_output([0], 2, gamma=2)

    def test_order_zero_is_the_output(self):
        x = np.array([0.4, -1.1])
        np.testing.assert_array_equal(lie_f(self.double, self.y, 0)(x), [0.4])

    def test_double_integrator_first_order(self):
        np.testing.assert_array_equal(lie_f(self.double, self.y, 1)(np.array([0.4, -1.1])), [-1.1])

    def test_double_integrator_lie_g(self):
        x = np.array([0.3, 0.2])
        np.testing.assert_array_equal(lie_g_lie_f(self.double, self.y, 0)(x), [[0.0]])
        np.testing.assert_array_equal(lie_g_lie_f(self.double, self.y, 1)(x), [[1.0]])

    def test_cartpole_second_order_against_trajectory(self):
        _, lsys, _ = load_model('cartpole')
        sys = to_control_affine(lsys)
        y = coordinate_output([0], 2, gamma=2, domain_kind='configuration')
        x0 = np.array([0.1, 2.0, 0.3, -0.7])
        h = 1e-3
        forward = rk4_step(sys.f, x0, h)
        backward = rk4_step(sys.f, x0, -h)
        second = (forward[0] - 2 * x0[0] + backward[0]) / h ** 2
        self.assertAlmostEqual(lie_f(sys, y, 2)(x0)[0], second, delta=1e-4)

    def test_cartpole_position_matches_closed_form(self):
        _, lsys, p = load_model('cartpole')
        sys = to_control_affine(lsys)
        y = coordinate_output([0], 2, gamma=2, domain_kind='configuration')
        mc, mp, l = p['cart_mass_kg'], p['pole_mass_kg'], p['pole_length_m']
        lgy = lie_g_lie_f(sys, y, 1)
        for x in SamplingPlan(sys.state_domain, 100, 'lhs', seed=2).points():
            det = (mc + mp) * mp * l ** 2 - (mp * l * math.cos(x[1])) ** 2
            self.assertAlmostEqual(lgy(x)[0, 0], mp * l ** 2 / det, delta=1e-10)


def zoo_output(name):
    """The affine form of a zoo model with the output its scenarios constrain."""
    _, sys, _ = load_model(name)
    if isinstance(sys, LagrangianSystem):
        affine = to_control_affine(sys)
        if name == 'two_link_arm':
            return affine, actuated_output(sys.B(np.zeros(2)))
        indices = [1, 2] if name == 'planar_quadrotor' else [0]
        return affine, coordinate_output(indices, sys.n, gamma=2, domain_kind='configuration')
    return sys, coordinate_output([0], sys.n, gamma=sys.n)


def rate_along(fn, x, v, step=1e-6):
    return (np.asarray(fn(x + step * v)) - np.asarray(fn(x - step * v))) / (2 * step)


class ZooLieDerivativeTests(SimpleTestCase):
    def assert_close(self, ad, fd):
        ad = np.atleast_1d(ad)
        self.assertLessEqual(np.max(np.abs(ad - fd)) / max(1.0, np.max(np.abs(ad))), 1e-6)

    def test_every_model_matches_finite_differences(self):
        for name in MODEL_ZOO:
            sys, y = zoo_output(name)
            levels = [lie_f(sys, y, i) for i in range(y.gamma + 1)]
            couplings = [lie_g_lie_f(sys, y, i) for i in range(y.gamma)]
            with self.subTest(model=name):
                for x in SamplingPlan(sys.state_domain, 100, 'lhs', seed=4).points():
                    fx, gx = sys.f(x), sys.g(x)
                    for i in range(y.gamma):
                        self.assert_close(levels[i + 1](x), rate_along(levels[i], x, fx))
                        fd = np.stack([rate_along(levels[i], x, gx[:, j]) for j in range(sys.m)], axis=-1)
                        self.assert_close(couplings[i](x), fd)

    def test_rates_stack_drift_and_coupling(self):
        for name in MODEL_ZOO:
            sys, y = zoo_output(name)
            rates = lie_rates(sys, y, y.gamma - 1)
            with self.subTest(model=name):
                for x in SamplingPlan(sys.state_domain, 10, 'lhs', seed=5).points():
                    stacked = rates(x)
                    np.testing.assert_allclose(stacked[:, 0], lie_f(sys, y, y.gamma)(x), rtol=1e-12, atol=1e-12)
                    np.testing.assert_allclose(stacked[:, 1:], lie_g_lie_f(sys, y, y.gamma - 1)(x),
                                               rtol=1e-12, atol=1e-12)

    def test_output_velocity_shortcuts_match_differentiation(self):
        _, arm, _ = load_model('two_link_arm')
        rng = np.random.default_rng(8)
        outputs = [actuated_output(arm.B(np.zeros(2))), coordinate_output([1], 2, gamma=2, domain_kind='configuration')]
        for y in outputs:
            q, v = rng.normal(size=2), rng.normal(size=2)
            np.testing.assert_allclose(y.velocity(q, v), directional_derivative(y.y, q, v), rtol=0, atol=1e-15)

class DecouplingMatrixTests(SimpleTestCase):
    def test_quadrotor_height_and_attitude(self):
        _, lsys, p = load_model('planar_quadrotor')
        A = decoupling_matrix(lsys, coordinate_output([1, 2], 3, gamma=2, domain_kind='configuration'))
        theta = 0.6
        np.testing.assert_allclose(A(np.array([0.5, 1.0, theta])),
                                   np.diag([math.cos(theta) / p['mass_kg'], -1 / p['inertia_kgm2']]),
                                   rtol=1e-12, atol=1e-14)

    def test_cartpole_angle(self):
        _, lsys, p = load_model('cartpole')
        A = decoupling_matrix(lsys, coordinate_output([1], 2, gamma=2, domain_kind='configuration'))
        mc, mp, l = p['cart_mass_kg'], p['pole_mass_kg'], p['pole_length_m']
        theta = 0.9
        det = (mc + mp) * mp * l ** 2 - (mp * l * math.cos(theta)) ** 2
        self.assertAlmostEqual(A(np.array([0.0, theta]))[0, 0], -mp * l * math.cos(theta) / det, delta=1e-12)

    def test_fully_actuated_arm_is_positive_definite(self):
        entry, lsys, _ = load_model('two_link_arm')
        y = actuated_output(np.eye(2))
        A = decoupling_matrix(lsys, y)
        for q in SamplingPlan(lsys.configuration_domain, 30, 'lhs', seed=5).points():
            Aq = A(q)
            np.testing.assert_allclose(Aq, Aq.T, atol=1e-12)
            self.assertGreater(np.min(np.linalg.eigvalsh(Aq)), 0.0)

    def test_agrees_with_lie_derivatives(self):
        rng = np.random.default_rng(8)
        for name, indices in (('cartpole', [0]), ('planar_quadrotor', [1, 2])):
            _, lsys, _ = load_model(name)
            sys = to_control_affine(lsys)
            y = coordinate_output(indices, lsys.n, gamma=2, domain_kind='configuration')
            A, lgy = decoupling_matrix(lsys, y), lie_g_lie_f(sys, y, 1)
            for q in SamplingPlan(lsys.configuration_domain, 50, 'lhs', seed=1).points():
                x = np.concatenate([q, rng.normal(size=lsys.n)])
                np.testing.assert_allclose(A(q), lgy(x), rtol=0, atol=1e-12)


class RelativeDegreeTests(SimpleTestCase):
    def test_cartpole_position_has_full_rank(self):
        _, lsys, _ = load_model('cartpole')
        y = coordinate_output([0], 2, gamma=2, domain_kind='configuration')
        report = verify_relative_degree(lsys, y, SamplingPlan(lsys.configuration_domain, 100, 'grid'))
        self.assertTrue(report.passed)
        self.assertEqual(report.witnesses, [])

    def test_cartpole_angle_loses_rank_at_horizontal_pole(self):
        _, lsys, _ = load_model('cartpole')
        y = coordinate_output([1], 2, gamma=2, domain_kind='configuration')
        report = verify_relative_degree(lsys, y, SamplingPlan(lsys.configuration_domain, 100, 'grid'))
        self.assertFalse(report.rank_ok)
        self.assertTrue(report.witnesses)
        self.assertTrue(any(abs(abs(w[1]) - math.pi / 2) < 1e-2 for w in report.witnesses))

    def test_quadrotor_attitude_range(self):
        _, lsys, _ = load_model('planar_quadrotor')
        y = coordinate_output([1, 2], 3, gamma=2, domain_kind='configuration')
        domain = lsys.configuration_domain
        safe = domain.replace([2], [-1.1], [1.1])
        self.assertTrue(verify_relative_degree(lsys, y, SamplingPlan(safe, 200, 'lhs')).rank_ok)
        wide = domain.replace([2], [-1.7], [1.7])
        self.assertFalse(verify_relative_degree(lsys, y, SamplingPlan(wide, 200, 'lhs')).rank_ok)

    def test_report_is_monotone_in_tolerance(self):
        _, lsys, _ = load_model('cartpole')
        y = coordinate_output([1], 2, gamma=2, domain_kind='configuration')
        plan = SamplingPlan(lsys.configuration_domain.replace([1], [-1.4], [1.4]), 60, 'lhs', seed=3)
        tolerances = [1e-8, 1e-6, 1e-3, 1e-1, 1.0]
        flags = [verify_relative_degree(lsys, y, plan, rank_tol=tol).rank_ok for tol in tolerances]
        for looser, stricter in zip(flags, flags[1:]):
            self.assertTrue(looser or not stricter)

    def test_triple_integrator_lower_order_terms_vanish(self):
        _, sys, _ = load_model('triple_integrator')
        y = coordinate_output([0], 3, gamma=3)
        report = verify_relative_degree(sys, y, SamplingPlan(sys.state_domain, 27, 'grid'))
        self.assertTrue(report.passed)
        self.assertLessEqual(report.max_zero_norm, 1e-10)

    def test_overclaimed_degree_fails_zero_condition(self):
        _, sys, _ = load_model('double_integrator')
        y = coordinate_output([0], 2, gamma=3)
        report = verify_relative_degree(sys, y, SamplingPlan(sys.state_domain, 16, 'grid'))
        self.assertFalse(report.zero_ok)
        self.assertFalse(report.passed)

    def test_underclaimed_degree_fails_rank(self):
        _, sys, _ = load_model('double_integrator')
        y = coordinate_output([0], 2, gamma=1)
        self.assertFalse(verify_relative_degree(sys, y, SamplingPlan(sys.state_domain, 16, 'grid')).rank_ok)

    def test_more_outputs_than_inputs_fails(self):
        _, lsys, _ = load_model('cartpole')
        y = coordinate_output([0, 1], 2, gamma=2, domain_kind='configuration')
        self.assertFalse(verify_relative_degree(lsys, y, SamplingPlan(lsys.configuration_domain, 16, 'grid')).rank_ok)

    def test_report_serializes(self):
        _, sys, _ = load_model('double_integrator')
        y = coordinate_output([0], 2, gamma=2)
        data = RankReportSerializer(verify_relative_degree(sys, y, SamplingPlan(sys.state_domain, 9, 'grid'))).data
        self.assertTrue(data['rank_ok'])
        self.assertTrue(data['passed'])
        self.assertEqual(data['min_singular_value'], 1.0)


class OutputCoordinatesTests(SimpleTestCase):
    def test_double_integrator(self):
        _, sys, _ = load_model('double_integrator')
        coords = output_coordinates(sys, coordinate_output([0], 2, gamma=2), np.array([1.0, 2.0]))
        np.testing.assert_array_equal(coords.eta, [1.0, 2.0])
        np.testing.assert_array_equal(coords.zeta(1), [1.0])
        np.testing.assert_array_equal(coords.level(2), [2.0])

    def test_relative_degree_one(self):
        _, sys, _ = load_model('single_integrator')
        coords = output_coordinates(sys, coordinate_output([0], 1, gamma=1), np.array([0.25]))
        np.testing.assert_array_equal(coords.eta, [0.25])

    def test_cartpole_velocity_level(self):
        _, lsys, _ = load_model('cartpole')
        sys = to_control_affine(lsys)
        x = np.array([0.5, 2.5, -0.8, 1.3])
        coords = output_coordinates(sys, coordinate_output([0], 2, gamma=2, domain_kind='configuration'), x)
        self.assertAlmostEqual(coords.level(2)[0], -0.8, delta=1e-12)
