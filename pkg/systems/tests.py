import math

import numpy as np
from django.test import SimpleTestCase

from autodiff.derivatives import directional_derivative, jacobian
from autodiff.models import SmoothFn
from core.exceptions import DimensionMismatch, NonFiniteValue, ScenarioConfigError, SingularInertia

from .domains import Box, SamplingPlan
from .dynamics import closed_loop_field, to_control_affine
from .models import ControlAffineSystem, LagrangianSystem
from .zoo import MODEL_ZOO, load_model


class BoxTests(SimpleTestCase):
    def test_inflate_and_clip(self):
        box = Box((0.0, -1.0), (1.0, 1.0))
        grown = box.inflate(0.1)
        np.testing.assert_allclose(grown.low, (-0.1, -1.2))
        np.testing.assert_allclose(grown.high, (1.1, 1.2))
        self.assertEqual(grown.clip(Box((0.0, 0.0), (5.0, 5.0))).low, (0.0, 0.0))

    def test_grid_and_lhs_cover_the_box(self):
        box = Box((-1.0, 2.0), (1.0, 3.0))
        grid = SamplingPlan(box, 25, 'grid').points()
        self.assertEqual(grid.shape, (25, 2))
        lhs = SamplingPlan(box, 40, 'lhs', seed=3).points()
        self.assertEqual(lhs.shape, (40, 2))
        self.assertTrue(all(box.contains(p) for p in lhs))
        np.testing.assert_array_equal(lhs, SamplingPlan(box, 40, 'lhs', seed=3).points())

    def test_unknown_method_rejected(self):
        with self.assertRaises(ValueError):
            SamplingPlan(Box((0.0,), (1.0,)), 10, 'sobol')


class ToControlAffineTests(SimpleTestCase):
    def setUp(self):
        _, self.cartpole, self.cartpole_params = load_model('cartpole')
        _, self.quadrotor, self.quadrotor_params = load_model('planar_quadrotor')

    def test_quadrotor_at_hover_configuration(self):
        sys = to_control_affine(self.quadrotor)
        x = np.zeros(6)
        m, inertia, g = (self.quadrotor_params[k] for k in ('mass_kg', 'inertia_kgm2', 'gravity_mps2'))
        np.testing.assert_allclose(sys.f(x), [0, 0, 0, 0, -g, 0], atol=1e-15)
        np.testing.assert_allclose(sys.g(x)[3:], [[0, 0], [1 / m, 0], [0, -1 / inertia]], atol=1e-15)

    def test_cartpole_hanging_at_rest_has_no_drift(self):
        sys = to_control_affine(self.cartpole)
        np.testing.assert_allclose(sys.f(np.zeros(4)), np.zeros(4), atol=1e-15)

    def test_accelerations_match_direct_solve(self):
        sys = to_control_affine(self.cartpole)
        rng = np.random.default_rng(1)
        for _ in range(200):
            x = np.concatenate([rng.uniform(-3, 3, 1), rng.uniform(-math.pi, math.pi, 1), rng.normal(size=2)])
            u = rng.normal(size=1)
            expected = self.cartpole.accelerations(x[:2], x[2:], u)
            np.testing.assert_allclose(sys.field(x, u)[2:], expected, rtol=0, atol=1e-10)

    def test_every_lagrangian_model_matches_direct_solve(self):
        rng = np.random.default_rng(2)
        for name, entry in MODEL_ZOO.items():
            if not entry.lagrangian:
                continue
            lsys = entry.system()
            sys = to_control_affine(lsys)
            box = lsys.configuration_domain
            with self.subTest(model=name):
                for q in SamplingPlan(box, 50, 'lhs', seed=4).points():
                    qd, u = rng.normal(size=lsys.n), rng.normal(size=lsys.m)
                    x = np.concatenate([q, qd])
                    np.testing.assert_allclose(sys.field(x, u)[lsys.n:], lsys.accelerations(q, qd, u),
                                               rtol=0, atol=1e-10)
                    np.testing.assert_array_equal(sys.g(x)[:lsys.n], np.zeros((lsys.n, lsys.m)))
                self.assertGreater(lsys.min_inertia_eigenvalue(SamplingPlan(box, 50, 'lhs').points()), 0.0)

    def test_drift_is_differentiable(self):
        sys = to_control_affine(self.quadrotor)
        rng = np.random.default_rng(6)
        x, v = rng.normal(size=6), rng.normal(size=6)
        np.testing.assert_allclose(directional_derivative(sys.f, x, v), jacobian(sys.f, x) @ v, rtol=0, atol=1e-12)

    def test_singular_inertia_raises(self):
        base = self.cartpole
        degenerate = LagrangianSystem(
            n=2, m=1,
            D=SmoothFn(2, (2, 2), lambda q: np.array([[1.0, 1.0], [1.0, 1.0]])),
            C=base.C, G=base.G, B=base.B,
            configuration_domain=base.configuration_domain,
        )
        with self.assertRaises(SingularInertia):
            to_control_affine(degenerate).f(np.zeros(4))


class ClosedLoopFieldTests(SimpleTestCase):
    def test_zero_feedback_is_the_drift(self):
        _, lsys, _ = load_model('cartpole')
        sys = to_control_affine(lsys)
        field = closed_loop_field(sys, lambda x: np.zeros(1))
        x = np.array([0.2, 1.0, -0.3, 0.5])
        np.testing.assert_array_equal(field(x), sys.f(x))

    def test_single_integrator_feedback(self):
        _, sys, _ = load_model('single_integrator')
        field = closed_loop_field(sys, lambda y: -y)
        np.testing.assert_allclose(field(np.array([0.7])), [-0.7])

    def test_constant_feedback_recomposes(self):
        _, lsys, _ = load_model('cartpole')
        sys = to_control_affine(lsys)
        field = closed_loop_field(sys, lambda x: np.array([1.0]))
        for x in SamplingPlan(sys.state_domain, 10, 'lhs', seed=9).points():
            np.testing.assert_allclose(field(x), sys.f(x) + sys.g(x)[:, 0], rtol=0, atol=1e-14)

    def test_wrong_feedback_width_raises(self):
        _, sys, _ = load_model('double_integrator')
        field = closed_loop_field(sys, lambda x: np.zeros(2))
        with self.assertRaises(DimensionMismatch):
            field(np.zeros(2))


class DomainCheckTests(SimpleTestCase):
    def test_zoo_models_are_finite_on_their_domains(self):
        for name in MODEL_ZOO:
            _, sys, _ = load_model(name)
            affine = to_control_affine(sys) if isinstance(sys, LagrangianSystem) else sys
            with self.subTest(model=name):
                points = SamplingPlan(affine.state_domain, 100, 'lhs', seed=0).points()
                self.assertEqual(affine.check_domain(points), 100)

    def test_overflowing_drift_is_rejected(self):
        sys = ControlAffineSystem(
            n=1, m=1,
            f=SmoothFn(1, (1,), lambda x: np.array([1e308 * x[0] * x[0]]), name='overflow'),
            g=SmoothFn(1, (1, 1), lambda x: np.array([[1.0]])),
            state_domain=Box((-2.0,), (2.0,)),
            name='overflowing',
        )
        with self.assertRaises(NonFiniteValue) as ctx:
            sys.check_domain(SamplingPlan(sys.state_domain, 20, 'lhs', seed=1).points())
        self.assertGreater(abs(ctx.exception.context['state'][0]), 1.0)
        self.assertEqual(ctx.exception.context['function'], 'overflow')
        self.assertIn('overflowing', ctx.exception.detail)


class ModelZooTests(SimpleTestCase):
    def test_overrides_apply(self):
        _, _, params = load_model('cartpole', {'pole_length_m': 1.0})
        self.assertEqual(params['pole_length_m'], 1.0)
        self.assertEqual(params['cart_mass_kg'], 1.0)

    def test_unknown_model_and_parameter(self):
        with self.assertRaises(ScenarioConfigError):
            load_model('segway')
        with self.assertRaises(ScenarioConfigError):
            load_model('cartpole', {'pole_mass': 1.0})

    def test_cartpole_matrices(self):
        _, lsys, p = load_model('cartpole')
        q = np.array([0.0, math.pi / 3])
        mc, mp, l = p['cart_mass_kg'], p['pole_mass_kg'], p['pole_length_m']
        np.testing.assert_allclose(lsys.D(q), [[mc + mp, mp * l * 0.5], [mp * l * 0.5, mp * l * l]])
        np.testing.assert_allclose(lsys.G(q), [0.0, mp * p['gravity_mps2'] * l * math.sin(math.pi / 3)])
        np.testing.assert_array_equal(lsys.B(q), [[1.0], [0.0]])
