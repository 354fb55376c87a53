import math

import numpy as np
from django.test import SimpleTestCase, override_settings

from autodiff.derivatives import directional_derivative, gradient
from autodiff.models import SmoothFn
from core.exceptions import GainTooSmall, GradientConditionViolated, InvalidRegion, RankDeficientOnC
from lie.models import actuated_output, coordinate_output
from systems.domains import Box, SamplingPlan
from systems.zoo import MODEL_ZOO, load_model

from .backstepping import build_cbf, cbf_relative_degree2, rank_domain, state_domain_for, virtual_controller_chain
from .constraints import band, ellipse, lower_bound, upper_bound
from .models import ClassKInfinity, OutputConstraint
from .serializers import CbfCandidateSerializer
from .sontag import check_gradient_condition, sontag_controller, sontag_phi, verify_sontag_condition

LINEAR = ClassKInfinity('linear', 1.0)


def central_gradient(fn, x, step=1e-6):
    out = np.zeros_like(x)
    for i in range(x.shape[0]):
        e = np.zeros_like(x)
        e[i] = step
        out[i] = (fn(x + e) - fn(x - e)) / (2 * step)
    return out


def hand_k1_and_slope(y, c=1.0, sigma=1.0):
    """k_1 for psi = 1 - y^2 with alpha(r) = c r, and dk_1/dy, both written out by hand."""
    a, da = c * (1 - y * y), -2 * c * y
    b, db = 4 * y * y, 8 * y
    root = math.sqrt(a * a + sigma * b * b)
    droot = (a * da + sigma * b * db) / root
    if a >= 0:
        phi = sigma * b / (2 * (a + root))
        dphi = sigma * db / (2 * (a + root)) - sigma * b * (da + droot) / (2 * (a + root) ** 2)
    else:
        phi = (-a + root) / (2 * b)
        dphi = (-da + droot) / (2 * b) - (-a + root) * db / (2 * b * b)
    return phi * (-2 * y), dphi * (-2 * y) - 2 * phi


class SontagPhiTests(SimpleTestCase):
    def test_zero_gradient_branch(self):
        self.assertEqual(sontag_phi(0.7, 0.0, 1.0), 0.0)

    def test_zero_drift_value(self):
        self.assertAlmostEqual(sontag_phi(0.0, 3.0, 1.0), 0.5, places=15)

    def test_unit_point(self):
        self.assertAlmostEqual(sontag_phi(1.0, 1.0, 1.0), (math.sqrt(2) - 1) / 2, delta=1e-12)

    def test_both_branches_agree_near_zero(self):
        self.assertAlmostEqual(sontag_phi(1e-12, 1.0, 2.0), sontag_phi(-1e-12, 1.0, 2.0), delta=1e-11)

    def test_outside_region_raises(self):
        with self.assertRaises(InvalidRegion):
            sontag_phi(-0.5, 0.0, 1.0)
        with self.assertRaises(InvalidRegion):
            sontag_phi(0.0, 0.0, 1.0)


class ClassKInfinityTests(SimpleTestCase):
    def test_shape_and_lipschitz_bound(self):
        grid = np.linspace(-5.0, 5.0, 201)
        for alpha in (ClassKInfinity('linear', 2.0), ClassKInfinity('arctan', 0.5)):
            with self.subTest(kind=alpha.kind):
                values = np.array([alpha(r) for r in grid])
                self.assertEqual(alpha(0.0), 0.0)
                self.assertTrue(np.all(np.diff(values) > 0))
                steps = np.abs(np.diff(values)) / np.diff(grid)
                self.assertTrue(np.all(steps <= alpha.lipschitz_constant + 1e-12))

    def test_rejects_bad_parameters(self):
        with self.assertRaises(ValueError):
            ClassKInfinity('cubic', 1.0)
        with self.assertRaises(ValueError):
            ClassKInfinity('linear', 0.0)


class SontagControllerTests(SimpleTestCase):
    def test_cart_position_margin(self):
        constraint = upper_bound(1.0, -3.0)
        k1 = sontag_controller(constraint, LINEAR, plan=SamplingPlan(constraint.d1_domain, 200, 'grid'))
        for y in SamplingPlan(constraint.d1_domain, 200, 'grid').points():
            psi = 1.0 - y[0]
            self.assertAlmostEqual(k1(y)[0], -sontag_phi(psi, 1.0, 1.0), delta=1e-15)
            self.assertGreater(k1.margin(y), 0.0)

    def test_band_centre_gives_zero_control(self):
        constraint = band(math.pi, math.pi / 4)
        k1 = sontag_controller(constraint, LINEAR)
        np.testing.assert_array_equal(k1(np.array([math.pi])), [0.0])
        self.assertGreater(k1.margin(np.array([math.pi])), 0.0)

    def test_ellipse_centre(self):
        constraint = ellipse([2.0, 0.0], [1.0, 1.0])
        k1 = sontag_controller(constraint, LINEAR)
        np.testing.assert_array_equal(k1(np.array([2.0, 0.0])), [0.0, 0.0])
        self.assertEqual(k1.margin(np.array([2.0, 0.0])), 1.0)

    def test_margin_on_every_example_constraint(self):
        constraints = [
            upper_bound(1.0, -3.0),
            band(math.pi, math.pi / 4),
            ellipse([2.0, 0.0], [1.0, 1.0]),
            lower_bound(1.0, 4.0),
        ]
        for alpha in (LINEAR, ClassKInfinity('arctan', 0.5)):
            for constraint in constraints:
                with self.subTest(constraint=constraint.name, alpha=alpha.kind):
                    plan = SamplingPlan(constraint.d1_domain, 10_000, 'lhs', seed=1)
                    report = verify_sontag_condition(sontag_controller(constraint, alpha, 0.5, plan=plan), plan)
                    self.assertEqual(report.violations, 0)
                    self.assertGreater(report.min_margin, 0.0)
                    self.assertTrue(report.passed)

    def test_vanishing_gradient_outside_interior_is_rejected(self):
        psi = SmoothFn(1, (), lambda y: -(y[0] * y[0]))
        constraint = OutputConstraint(psi, Box((-1.0,), (1.0,)), name='flat')
        with self.assertRaises(GradientConditionViolated) as ctx:
            check_gradient_condition(constraint, SamplingPlan(constraint.c1_box, 3, 'grid'))
        self.assertEqual(ctx.exception.context['witnesses'], [[0.0]])


class VirtualControllerTests(SimpleTestCase):
    def setUp(self):
        _, self.triple, _ = load_model('triple_integrator')
        self.y3 = coordinate_output([0], 3, gamma=3)
        self.constraint = band(0.0, 1.0)

    def test_relative_degree_two_chain_is_k1(self):
        _, double, _ = load_model('double_integrator')
        chain = virtual_controller_chain(double, coordinate_output([0], 2, gamma=2), self.constraint,
                                         LINEAR, mu=(1.0,), lam=(1.0,))
        self.assertEqual(len(chain), 1)
        k1 = sontag_controller(self.constraint, LINEAR)
        self.assertEqual(chain[0](np.array([0.4]))[0], k1(np.array([0.4]))[0])

    def test_second_controller_matches_hand_expansion(self):
        mu, lam = (1.5, 0.7), (2.0, 1.0)
        chain = virtual_controller_chain(self.triple, self.y3, self.constraint, LINEAR, mu, lam)
        rng = np.random.default_rng(4)
        for eta1, eta2 in rng.uniform(-1.2, 1.2, size=(100, 2)):
            if abs(eta1) < 1e-3:
                continue
            k1, dk1 = hand_k1_and_slope(eta1)
            expected = dk1 * eta2 + mu[0] * (-2 * eta1) - lam[0] / 2 * (eta2 - k1)
            self.assertAlmostEqual(chain[1](np.array([eta1, eta2]))[0], expected, delta=1e-10 * max(1.0, abs(expected)))

    def test_k1_rate_matches_finite_difference(self):
        k1 = sontag_controller(self.constraint, LINEAR).as_fn()
        rng = np.random.default_rng(12)
        for eta1, eta2 in rng.uniform(-1.2, 1.2, size=(20, 2)):
            h = 1e-6
            fd = (k1(np.array([eta1 + h * eta2]))[0] - k1(np.array([eta1 - h * eta2]))[0]) / (2 * h)
            ad = directional_derivative(k1, np.array([eta1]), np.array([eta2]))[0]
            self.assertAlmostEqual(ad, fd, delta=1e-6 * max(1.0, abs(ad)))

    def test_gain_checks(self):
        with self.assertRaises(GainTooSmall):
            virtual_controller_chain(self.triple, self.y3, self.constraint, LINEAR, (1.0, 1.0), (1.0, 0.5))
        with self.assertRaises(GainTooSmall):
            virtual_controller_chain(self.triple, self.y3, self.constraint, LINEAR, (1.0, 0.0), (1.0, 1.0))
        with self.assertRaises(GainTooSmall):
            virtual_controller_chain(self.triple, self.y3, self.constraint, LINEAR, (1.0,), (1.0,))
        with self.assertRaises(GainTooSmall):
            virtual_controller_chain(self.triple, self.y3, self.constraint, ClassKInfinity('arctan', 1.0),
                                     (1.0, 1.0), (1.5, 2.0))

    def test_gain_check_can_be_skipped(self):
        chain = virtual_controller_chain(self.triple, self.y3, self.constraint, LINEAR, (1.0, 1.0), (0.0, 1.0),
                                         enforce_gains=False)
        self.assertEqual(len(chain), 2)


class BuildCbfTests(SimpleTestCase):
    def setUp(self):
        _, self.double, _ = load_model('double_integrator')
        self.y2 = coordinate_output([0], 2, gamma=2)
        self.constraint = band(0.0, 1.0)
        self.cbf = build_cbf(self.double, self.y2, self.constraint, LINEAR, mu=(1.0,), lam=(1.0,))

    def test_double_integrator_closed_form(self):
        k1 = sontag_controller(self.constraint, LINEAR)
        for x in SamplingPlan(self.double.state_domain, 50, 'lhs', seed=2).points():
            expected = 1 - x[0] ** 2 - 0.5 * (x[1] - k1(x[:1])[0]) ** 2
            self.assertAlmostEqual(self.cbf.h(x), expected, delta=1e-14)

    def test_on_the_manifold_h_equals_psi(self):
        k1 = sontag_controller(self.constraint, LINEAR)
        for x1 in np.linspace(-1.3, 1.3, 11):
            x = np.array([x1, k1(np.array([x1]))[0]])
            self.assertAlmostEqual(self.cbf.h(x), self.cbf.psi_value(x), delta=1e-15)

    def test_safe_set_inside_constraint_set(self):
        for x in SamplingPlan(self.double.state_domain, 200, 'lhs', seed=3).points():
            self.assertLessEqual(self.cbf.h(x), self.cbf.psi_value(x))

    def test_gradient_against_finite_difference(self):
        _, triple, _ = load_model('triple_integrator')
        cbf = build_cbf(triple, coordinate_output([0], 3, gamma=3), self.constraint, LINEAR,
                        mu=(1.0, 2.0), lam=(1.0, 1.0))
        for x in SamplingPlan(triple.state_domain.inflate(-0.2), 20, 'lhs', seed=5).points():
            ad = cbf.gradient(x)
            fd = central_gradient(cbf.h, x)
            self.assertLessEqual(np.max(np.abs(ad - fd)) / max(1.0, np.max(np.abs(ad))), 1e-6)

    def test_lie_derivatives(self):
        x = np.array([0.2, -0.4])
        h, lf, lg = self.cbf.lie_derivatives(x)
        grad = self.cbf.gradient(x)
        self.assertAlmostEqual(h, self.cbf.h(x), delta=1e-15)
        self.assertAlmostEqual(lf, grad[0] * x[1], delta=1e-14)
        np.testing.assert_allclose(lg, [grad[1]], atol=1e-14)

    def test_relative_degree_one(self):
        _, single, _ = load_model('single_integrator')
        cbf = build_cbf(single, coordinate_output([0], 1, gamma=1), self.constraint, LINEAR)
        self.assertEqual(cbf.chain, ())
        self.assertAlmostEqual(cbf.h(np.array([0.5])), 0.75)

    def test_metadata_serializes(self):
        data = CbfCandidateSerializer(self.cbf).data
        self.assertEqual(data['relative_degree'], 2)
        self.assertEqual(data['lambda'], [1.0])
        self.assertIsNone(data['rank_report'])
        self.assertEqual(data['constraint']['kind'], 'band')


class RelativeDegreeTwoTests(SimpleTestCase):
    @override_settings(BARRIERS={'AD_CHUNK_SIZE': 6})
    def test_agrees_with_general_construction(self):
        cases = [
            ('cartpole', coordinate_output([0], 2, 2, 'configuration'), upper_bound(1.0, -3.0)),
            ('planar_quadrotor', coordinate_output([1, 2], 3, 2, 'configuration'), ellipse([2.0, 0.0], [1.0, 1.0])),
        ]
        for name, y, constraint in cases:
            _, lsys, _ = load_model(name)
            general = build_cbf(lsys, y, constraint, LINEAR, mu=(2.0,), lam=(1.0,))
            special = cbf_relative_degree2(lsys, y, constraint, LINEAR, mu=2.0, verify=False)
            box = state_domain_for(lsys, rank_domain(lsys, y, constraint))
            with self.subTest(model=name):
                for x in SamplingPlan(box, 1000, 'lhs', seed=6).points():
                    self.assertAlmostEqual(general.h(x), special.h(x), delta=1e-12)
                    np.testing.assert_allclose(general.gradient(x), special.gradient(x), rtol=0, atol=1e-12)

    def test_quadrotor_ellipse_boundary_at_rest_is_unsafe(self):
        _, lsys, _ = load_model('planar_quadrotor')
        y = coordinate_output([1, 2], 3, 2, 'configuration')
        cbf = cbf_relative_degree2(lsys, y, ellipse([2.0, 0.0], [1.0, 1.0]), LINEAR, mu=10.0, sigma=0.1)
        self.assertTrue(cbf.rank_report.passed)
        x = np.array([0.0, 1.0, 0.0, 0.0, 0.0, 0.0])
        self.assertEqual(cbf.psi_value(x), 0.0)
        self.assertLess(cbf.h(x), 0.0)

    def test_cartpole_on_manifold(self):
        _, lsys, _ = load_model('cartpole')
        y = coordinate_output([0], 2, 2, 'configuration')
        constraint = upper_bound(1.0, -3.0)
        cbf = cbf_relative_degree2(lsys, y, constraint, LINEAR)
        k1 = sontag_controller(constraint, LINEAR)
        for cart in (-2.0, 0.0, 0.9):
            x = np.array([cart, 2.5, k1(np.array([cart]))[0], -1.0])
            self.assertAlmostEqual(cbf.h(x), 1.0 - cart, delta=1e-15)

    def test_quadrotor_height_only_fails_rank(self):
        _, lsys, _ = load_model('planar_quadrotor')
        y = coordinate_output([1], 3, 2, 'configuration')
        with self.assertRaises(RankDeficientOnC) as ctx:
            cbf_relative_degree2(lsys, y, lower_bound(1.0, 4.0), LINEAR)
        self.assertFalse(ctx.exception.context['report'].rank_ok)

    def test_rejects_state_outputs(self):
        _, lsys, _ = load_model('cartpole')
        with self.assertRaises(ValueError):
            cbf_relative_degree2(lsys, coordinate_output([0], 4, 2), upper_bound(1.0, -3.0), LINEAR)


def zoo_candidate(name):
    """A barrier on the first output of each zoo model, built the way its scenarios build it."""
    _, sys, _ = load_model(name)
    if name == 'cartpole':
        return cbf_relative_degree2(sys, coordinate_output([0], 2, 2, 'configuration'), upper_bound(1.0, -3.0),
                                    LINEAR, verify=False)
    if name == 'planar_quadrotor':
        return cbf_relative_degree2(sys, coordinate_output([1, 2], 3, 2, 'configuration'),
                                    ellipse([2.0, 0.0], [1.0, 1.0]), LINEAR, mu=10.0, sigma=0.1, verify=False)
    if name == 'two_link_arm':
        return cbf_relative_degree2(sys, actuated_output(sys.B(np.zeros(2)), name='q'), band([0.0, 0.0], 1.0),
                                    ClassKInfinity('arctan', 1.0), mu=2.0, verify=False)
    order = sys.n
    return build_cbf(sys, coordinate_output([0], order, gamma=order), band(0.0, 1.0), LINEAR,
                     mu=(1.0, 2.0)[:order - 1], lam=(1.0, 1.0)[:order - 1])


class ZooGradientTests(SimpleTestCase):
    def test_every_model_matches_finite_differences(self):
        for name in MODEL_ZOO:
            cbf = zoo_candidate(name)
            box = cbf.system.state_domain.inflate(-0.2)
            with self.subTest(model=name):
                for x in SamplingPlan(box, 100, 'lhs', seed=12).points():
                    ad = cbf.gradient(x)
                    fd = central_gradient(cbf.h, x)
                    self.assertLessEqual(np.max(np.abs(ad - fd)) / max(1.0, np.max(np.abs(ad))), 1e-6)

    def test_lie_derivatives_are_gradient_products(self):
        for name in MODEL_ZOO:
            cbf = zoo_candidate(name)
            sys = cbf.system
            with self.subTest(model=name):
                for x in SamplingPlan(sys.state_domain.inflate(-0.2), 20, 'lhs', seed=13).points():
                    h, lf, lg = cbf.lie_derivatives(x)
                    grad = cbf.gradient(x)
                    self.assertAlmostEqual(h, cbf.h(x), delta=1e-12)
                    self.assertAlmostEqual(lf, grad @ sys.f(x), delta=1e-9 * max(1.0, abs(lf)))
                    np.testing.assert_allclose(lg, grad @ sys.g(x), rtol=1e-9, atol=1e-9)


class ConstraintGradientTests(SimpleTestCase):
    def test_closed_forms_match_differentiation(self):
        constraints = [
            upper_bound(1.0, -3.0),
            lower_bound(1.0, 4.0),
            band(math.pi, math.pi / 4),
            band([0.5, -1.0], 2.0),
            ellipse([2.0, 0.0], [1.0, 0.5]),
        ]
        for constraint in constraints:
            with self.subTest(constraint=constraint.name):
                self.assertIsNotNone(constraint.grad)
                for y in SamplingPlan(constraint.d1_domain, 50, 'lhs', seed=14).points():
                    np.testing.assert_allclose(constraint.gradient(y), gradient(constraint.psi, y),
                                               rtol=1e-14, atol=1e-14)

    def test_hand_written_constraint_falls_back_to_differentiation(self):
        psi = SmoothFn(2, (), lambda y: 1.0 - y[0] ** 4 - y[1] ** 2)
        constraint = OutputConstraint(psi, Box((-1.0, -1.0), (1.0, 1.0)), name='quartic')
        np.testing.assert_allclose(constraint.gradient(np.array([0.5, -0.5])), [-0.5, 1.0])

    def test_mismatched_gradient_rejected(self):
        psi = SmoothFn(2, (), lambda y: 1.0 - y[0] ** 2 - y[1] ** 2)
        grad = SmoothFn(1, (1,), lambda y: np.array([-2.0 * y[0]]))
        with self.assertRaises(ValueError):
            OutputConstraint(psi, Box((-1.0, -1.0), (1.0, 1.0)), grad=grad)
