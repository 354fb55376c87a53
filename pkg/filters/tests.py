import math

import numpy as np
from django.test import SimpleTestCase

from core.exceptions import InfeasibleAtState, RankDeficientAtState
from lie.derivatives import lie_f, lie_g_lie_f, output_coordinate_fn
from lie.models import coordinate_output
from synthesis.backstepping import build_cbf, cbf_relative_degree2, rank_domain, state_domain_for
from synthesis.constraints import band, ellipse, lower_bound, upper_bound
from synthesis.models import ClassKInfinity
from synthesis.sontag import sontag_controller
from systems.domains import Box, SamplingPlan
from systems.zoo import load_model

from .controllers import ExplicitController, universal_controller
from .qp import qp_filter
from .serializers import FilterDecisionSerializer
from .verification import verify_cbf_condition

LINEAR = ClassKInfinity('linear', 1.0)


class FixedLieCandidate:
    """Stands in for a candidate whose Lie derivatives are known."""

    def __init__(self, h, lf, lg):
        self.alpha = LINEAR
        self.values = (h, lf, np.asarray(lg, dtype=float))

    def lie_derivatives(self, x, drift=None, actuation=None):
        return self.values


def kkt_oracle(lf, lg, a, u_desired):
    """Solve the single constraint QP through its KKT system, trying the inactive set first."""
    if lf + lg @ u_desired + a >= 0:
        return u_desired
    m = lg.shape[0]
    kkt = np.zeros((m + 1, m + 1))
    kkt[:m, :m] = np.eye(m)
    kkt[:m, m] = -lg
    kkt[m, :m] = lg
    rhs = np.concatenate([u_desired, [-(lf + a)]])
    return np.linalg.solve(kkt, rhs)[:m]


class QpFilterTests(SimpleTestCase):
    def test_inactive_constraint_passes_input_through(self):
        u = np.array([0.3, -0.2])
        decision = qp_filter(FixedLieCandidate(1.0, 0.5, [1.0, 0.0]), np.zeros(2), u)
        self.assertFalse(decision.active)
        self.assertIs(decision.u_safe, decision.u_desired)
        np.testing.assert_array_equal(decision.u_safe, u)

    def test_scalar_halfspace_projection(self):
        decision = qp_filter(FixedLieCandidate(-1.0, 0.0, [1.0]), np.zeros(1), [0.0])
        self.assertTrue(decision.active)
        np.testing.assert_allclose(decision.u_safe, [1.0])
        self.assertAlmostEqual(decision.constraint_value, 0.0)

    def test_matches_kkt_oracle_and_is_minimal(self):
        rng = np.random.default_rng(21)
        for _ in range(1000):
            h, lf = rng.normal(), rng.normal() * 3
            lg, u_desired = rng.normal(size=2), rng.normal(size=2) * 2
            decision = qp_filter(FixedLieCandidate(h, lf, lg), np.zeros(2), u_desired)
            expected = kkt_oracle(lf, lg, LINEAR(h), u_desired)
            np.testing.assert_allclose(decision.u_safe, expected, rtol=0, atol=1e-10)
            self.assertGreaterEqual(decision.constraint_value, -1e-10)
            distance = np.linalg.norm(decision.u_safe - u_desired)
            competitors = u_desired + rng.normal(size=(100, 2)) * 3
            feasible = competitors[lf + competitors @ lg + LINEAR(h) >= 0]
            if feasible.size:
                closest = np.min(np.linalg.norm(feasible - u_desired, axis=1))
                self.assertLessEqual(distance, closest + 1e-12)

    def test_vanishing_lg_h(self):
        u = np.array([2.0])
        decision = qp_filter(FixedLieCandidate(0.5, 0.1, [0.0]), np.zeros(1), u)
        self.assertFalse(decision.active)
        with self.assertRaises(InfeasibleAtState):
            qp_filter(FixedLieCandidate(-0.5, 0.1, [0.0]), np.zeros(1), u)

    def test_real_candidate_is_pushed_back(self):
        _, double, _ = load_model('double_integrator')
        cbf = build_cbf(double, coordinate_output([0], 2, gamma=2), band(0.0, 1.0), LINEAR, (1.0,), (1.0,))
        decision = qp_filter(cbf, np.array([0.8, 0.5]), np.array([50.0]))
        self.assertTrue(decision.active)
        self.assertLess(decision.u_safe[0], 50.0)
        self.assertAlmostEqual(decision.constraint_value, 0.0, delta=1e-9)

    def test_supplied_vector_fields_give_the_same_decision(self):
        _, lsys, _ = load_model('cartpole')
        y = coordinate_output([0], 2, 2, 'configuration')
        cbf = cbf_relative_degree2(lsys, y, upper_bound(1.0, -3.0), LINEAR, verify=False)
        x, u = np.array([0.8, 0.3, 1.5, -0.4]), np.array([20.0])
        plain = qp_filter(cbf, x, u)
        shared = qp_filter(cbf, x, u, drift=cbf.system.f(x), actuation=cbf.system.g(x))
        self.assertTrue(plain.active)
        np.testing.assert_array_equal(shared.u_safe, plain.u_safe)
        self.assertEqual(shared.h, plain.h)

    def test_decision_serializes(self):
        decision = qp_filter(FixedLieCandidate(-1.0, 0.0, [1.0]), np.zeros(1), [0.0])
        data = FilterDecisionSerializer(decision).data
        self.assertEqual(data['u_safe'], [1.0])
        self.assertTrue(data['active'])


class UniversalControllerTests(SimpleTestCase):
    def test_double_integrator_on_manifold(self):
        _, double, _ = load_model('double_integrator')
        constraint = band(0.0, 1.0)
        cbf = build_cbf(double, coordinate_output([0], 2, gamma=2), constraint, LINEAR, (1.0,), (1.0,))
        k1 = sontag_controller(constraint, LINEAR)
        for x1 in (-0.9, -0.2, 0.4, 0.95):
            x = np.array([x1, k1(np.array([x1]))[0]])
            u = universal_controller(cbf, x)
            h, lf, lg = cbf.lie_derivatives(x)
            self.assertGreater(lf + lg @ u + LINEAR(h), 0.0)
            # On the manifold the margin is the first virtual controller's margin.
            self.assertAlmostEqual(lf + lg @ u + LINEAR(h), k1.margin(x[:1]), delta=1e-10)

    def test_square_decoupling_is_solved_exactly(self):
        _, lsys, _ = load_model('planar_quadrotor')
        y = coordinate_output([1, 2], 3, 2, 'configuration')
        cbf = cbf_relative_degree2(lsys, y, ellipse([2.0, 0.0], [1.0, 1.0]), LINEAR, mu=10.0, sigma=0.1, verify=False)
        x = np.array([0.3, 1.7, 0.4, 0.1, -0.2, 0.3])
        u = universal_controller(cbf, x)
        A = lie_g_lie_f(cbf.system, y, 1)(x)
        rhs = cbf.target(output_coordinate_fn(cbf.system, y)(x)) - lie_f(cbf.system, y, 2)(x)
        np.testing.assert_allclose(A @ u, rhs, rtol=1e-12, atol=1e-10)

    def test_rank_loss_raises(self):
        _, lsys, _ = load_model('planar_quadrotor')
        y = coordinate_output([1], 3, 2, 'configuration')
        cbf = cbf_relative_degree2(lsys, y, lower_bound(1.0, 4.0), LINEAR, verify=False)
        with self.assertRaises(RankDeficientAtState):
            universal_controller(cbf, np.array([0.0, 2.0, math.pi / 2, 0.0, 0.0, 0.0]))


class VerifyCbfConditionTests(SimpleTestCase):
    def test_cartpole_position_candidate(self):
        _, lsys, _ = load_model('cartpole')
        y = coordinate_output([0], 2, 2, 'configuration')
        constraint = upper_bound(1.0, -3.0)
        cbf = cbf_relative_degree2(lsys, y, constraint, LINEAR, verify=False)
        box = state_domain_for(lsys, rank_domain(lsys, y, constraint))
        report = verify_cbf_condition(cbf, SamplingPlan(box, 10_000, 'lhs', seed=1))
        self.assertGreater(report.accepted, 0)
        self.assertEqual(report.violations, 0)
        self.assertTrue(report.passed)

    def test_quadrotor_ellipse_candidate(self):
        _, lsys, _ = load_model('planar_quadrotor')
        y = coordinate_output([1, 2], 3, 2, 'configuration')
        constraint = ellipse([2.0, 0.0], [1.0, 1.0])
        cbf = cbf_relative_degree2(lsys, y, constraint, LINEAR, mu=10.0, sigma=0.1, verify=False)
        box = state_domain_for(lsys, rank_domain(lsys, y, constraint))
        report = verify_cbf_condition(cbf, SamplingPlan(box, 10_000, 'lhs', seed=2))
        self.assertGreater(report.accepted, 0)
        self.assertTrue(report.passed)
        self.assertGreater(report.min_margin, 0.0)

    def test_cartpole_angle_candidate(self):
        _, lsys, _ = load_model('cartpole')
        y = coordinate_output([1], 2, 2, 'configuration')
        constraint = band(math.pi, math.pi / 4)
        cbf = cbf_relative_degree2(lsys, y, constraint, LINEAR, verify=False)
        box = state_domain_for(lsys, rank_domain(lsys, y, constraint))
        report = verify_cbf_condition(cbf, SamplingPlan(box, 10_000, 'lhs', seed=6))
        self.assertGreater(report.accepted, 0)
        self.assertEqual(report.violations, 0)
        self.assertGreater(report.min_margin, 0.0)

    def test_double_integrator_candidate(self):
        _, double, _ = load_model('double_integrator')
        cbf = build_cbf(double, coordinate_output([0], 2, gamma=2), band(0.0, 1.0), LINEAR, (1.0,), (1.0,))
        report = verify_cbf_condition(cbf, SamplingPlan(double.state_domain, 10_000, 'lhs', seed=7))
        self.assertTrue(report.passed)

    def test_triple_integrator_with_minimum_gains(self):
        _, triple, _ = load_model('triple_integrator')
        cbf = build_cbf(triple, coordinate_output([0], 3, gamma=3), band(0.0, 1.0), LINEAR, (1.0, 1.0), (1.0, 1.0))
        report = verify_cbf_condition(cbf, SamplingPlan(triple.state_domain, 2000, 'lhs', seed=3))
        self.assertTrue(report.passed)

    def test_broken_gain_is_caught(self):
        _, triple, _ = load_model('triple_integrator')
        cbf = build_cbf(triple, coordinate_output([0], 3, gamma=3), band(0.0, 1.0), LINEAR, (1.0, 1.0), (0.0, 1.0),
                        enforce_gains=False)
        plan = SamplingPlan(Box((-0.5, -2.0, -2.0), (0.5, 2.0, 2.0)), 300, 'lhs', seed=4)
        report = verify_cbf_condition(cbf, plan, inflation=1.0)
        self.assertGreaterEqual(report.violations, 1)
        self.assertTrue(report.witnesses)

    def test_height_only_candidate_loses_rank_inside_the_set(self):
        _, lsys, _ = load_model('planar_quadrotor')
        y = coordinate_output([1], 3, 2, 'configuration')
        constraint = lower_bound(1.0, 4.0)
        cbf = cbf_relative_degree2(lsys, y, constraint, LINEAR, verify=False)
        box = state_domain_for(lsys, rank_domain(lsys, y, constraint))
        report = verify_cbf_condition(cbf, SamplingPlan(box, 200, 'lhs', seed=5))
        self.assertFalse(report.passed)
        self.assertTrue(any(abs(math.cos(w[2])) < 1e-2 for w in report.witnesses))

    def test_explicit_controller_reuses_lie_functions(self):
        _, double, _ = load_model('double_integrator')
        cbf = build_cbf(double, coordinate_output([0], 2, gamma=2), band(0.0, 1.0), LINEAR, (1.0,), (1.0,))
        controller = ExplicitController(cbf)
        x = np.array([0.1, 0.2])
        np.testing.assert_array_equal(controller(x), universal_controller(cbf, x))
