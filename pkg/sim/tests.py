import io
import json
import math
import time

import numpy as np
from django.test import SimpleTestCase
from scipy.linalg import expm

from core.exceptions import InitialStateUnsafe, NonFiniteState
from lie.models import coordinate_output
from synthesis.constraints import band, ellipse, upper_bound
from synthesis.models import ClassKInfinity
from systems.zoo import load_model

from .models import Gains, Scenario
from .nominal import PdChannel, PdController, ZeroController
from .runner import build_candidate, invariance_report, simulate, step_count
from .writers import RunSummary, plot_script, render_summary, write_csv


def double_integrator_scenario(initial_state=(0.0, 0.0), target=2.0, horizon=1.0, dt=0.01,
                               filter_enabled=True, nominal=None):
    _, system, params = load_model('double_integrator')
    return Scenario(
        name='double-integrator', model='double_integrator', params=params, system=system,
        output=coordinate_output((0,), 2, 2, name='x1'),
        constraint=band(0.0, 1.0),
        gains=Gains(ClassKInfinity('linear', 1.0), mu=(1.0,)),
        nominal=nominal or PdController((PdChannel(0, 1, target=target, kp=5.0, kd=2.0),)),
        initial_state=tuple(initial_state), horizon=horizon, dt=dt, filter_enabled=filter_enabled,
    )


def cartpole_position_scenario(filter_enabled=True, horizon=1.5, dt=5e-3):
    _, system, params = load_model('cartpole')
    return Scenario(
        name='cartpole-position', model='cartpole', params=params, system=system,
        output=coordinate_output((0,), 2, 2, 'configuration', name='x'),
        constraint=upper_bound(1.0, low=-3.0),
        gains=Gains(ClassKInfinity('linear', 1.0), mu=(1.0,)),
        nominal=PdController((PdChannel(0, 2, target=1.5, kp=5.0, kd=2.0),)),
        initial_state=(0.7, 0.0, 0.0, 0.0), horizon=horizon, dt=dt, filter_enabled=filter_enabled,
    )


def quadrotor_ellipse_scenario(horizon=10.0, dt=1e-3):
    _, system, params = load_model('planar_quadrotor')
    thrust = PdChannel(1, 4, target=0.0, kp=5.0, kd=4.0, offset=9.81)
    moment = PdChannel(2, 5, target=0.0, kp=25.0, kd=10.0, scale=-0.01)
    return Scenario(
        name='quadrotor-ellipse', model='planar_quadrotor', params=params, system=system,
        output=coordinate_output((1, 2), 3, 2, 'configuration', name='(z, theta)'),
        constraint=ellipse((2.0, 0.0), (1.0, 1.0)),
        gains=Gains(ClassKInfinity('linear', 1.0), mu=(10.0,), sigma=0.1),
        nominal=PdController((thrust, moment)),
        initial_state=(0.0, 2.0, 0.0, 0.0, 0.0, 0.0), horizon=horizon, dt=dt,
    )


def cartpole_angle_scenario(horizon=10.0, dt=1e-3):
    _, system, params = load_model('cartpole')
    return Scenario(
        name='cartpole-angle', model='cartpole', params=params, system=system,
        output=coordinate_output((1,), 2, 2, 'configuration', name='theta'),
        constraint=band(math.pi, math.pi / 4),
        gains=Gains(ClassKInfinity('linear', 1.0), mu=(1.0,)),
        nominal=ZeroController(1),
        initial_state=(0.0, math.pi + 0.1, 0.0, 0.0), horizon=horizon, dt=dt,
    )

class NominalControllerTests(SimpleTestCase):
    def test_pd_channel(self):
        channel = PdChannel(1, 3, target=2.0, kp=4.0, kd=0.5, scale=2.0, offset=1.0)
        x = np.array([0.0, 1.5, 0.0, -2.0])
        self.assertAlmostEqual(channel(x), 1.0 + 2.0 * (4.0 * 0.5 + 0.5 * 2.0))

    def test_zero_controller(self):
        np.testing.assert_array_equal(ZeroController(2)(np.ones(4)), np.zeros(2))


class SimulateTests(SimpleTestCase):
    def test_grid_length(self):
        self.assertEqual(step_count(10.0, 1e-3), 10000)
        self.assertEqual(step_count(0.105, 0.01), 10)
        log = simulate(double_integrator_scenario(initial_state=(0.0, 0.0), horizon=0.1))
        self.assertEqual(len(log), 11)
        self.assertAlmostEqual(log.times[-1], 0.1)
        self.assertTrue(np.all(np.isfinite(log.states)))

    def test_candidate_form_follows_the_model(self):
        self.assertEqual(build_candidate(cartpole_position_scenario()).form, 'relative_degree_2')
        self.assertEqual(build_candidate(double_integrator_scenario()).form, 'general')

    def test_unsafe_initial_state_rejected(self):
        with self.assertRaises(InitialStateUnsafe):
            simulate(double_integrator_scenario(initial_state=(1.5, 0.0)))

    def test_filter_keeps_cart_below_limit(self):
        log = simulate(cartpole_position_scenario())
        report = invariance_report(log)
        self.assertLessEqual(np.max(log.states[:, 0]), 1.0 + 1e-3)
        self.assertGreaterEqual(report.min_h, -1e-3)
        self.assertGreaterEqual(report.min_psi, report.min_h)
        self.assertTrue(report.psi_dominates_h)
        self.assertGreater(report.active_fraction, 0.0)
        self.assertTrue(report.passed)

    def test_unfiltered_nominal_leaves_the_constraint_set(self):
        report = invariance_report(simulate(cartpole_position_scenario(filter_enabled=False)))
        self.assertLess(report.min_psi, 0.0)
        self.assertGreater(report.max_violation, 0.0)
        self.assertEqual(report.active_fraction, 0.0)
        self.assertFalse(report.passed)

    def test_start_on_the_boundary(self):
        scenario = double_integrator_scenario(horizon=1.0)
        cbf = build_candidate(scenario)
        x0 = (1.0, float(cbf.chain[0](np.array([1.0]))[0]))
        self.assertEqual(cbf.h(np.array(x0)), 0.0)
        log = simulate(double_integrator_scenario(initial_state=x0, horizon=1.0), cbf=cbf)
        report = invariance_report(log)
        self.assertGreaterEqual(report.min_h, -1e-3)
        self.assertTrue(report.psi_dominates_h)

    def test_pole_stays_within_a_quarter_turn_of_upright(self):
        log = simulate(cartpole_angle_scenario(dt=0.01))
        self.assertEqual(len(log), 1001)
        self.assertLessEqual(np.max(np.abs(log.states[:, 1] - math.pi)), math.pi / 4 + 1e-3)
        self.assertTrue(invariance_report(log).passed)

    def test_quadrotor_holds_the_ellipse(self):
        log = simulate(quadrotor_ellipse_scenario(horizon=3.0, dt=0.01))
        self.assertGreaterEqual(np.min(log.states[:, 1]), 1.0 - 1e-3)
        self.assertLessEqual(np.max(np.abs(log.states[:, 2])), 1.0 + 1e-3)
        self.assertTrue(invariance_report(log).passed)

    def test_halving_dt_shrinks_undershoot(self):
        def undershoot(dt):
            return max(0.0, -invariance_report(simulate(double_integrator_scenario(horizon=2.0, dt=dt))).min_h)

        coarse, fine = undershoot(0.02), undershoot(0.01)
        self.assertLessEqual(coarse, 1e-3)
        self.assertLessEqual(fine, max(coarse / 1.8, 1e-7))

    def test_rk4_is_fourth_order(self):
        kp, kd, target = 5.0, 2.0, 0.5
        x0 = np.array([0.2, 0.0])
        A = np.array([[0.0, 1.0], [-kp, -kd]])
        rest = np.array([target, 0.0])
        exact = rest + expm(A) @ (x0 - rest)

        def error(dt):
            log = simulate(double_integrator_scenario(initial_state=x0, target=target, horizon=1.0, dt=dt,
                                                      filter_enabled=False))
            self.assertAlmostEqual(log.times[-1], 1.0)
            return np.linalg.norm(log.states[-1] - exact)

        self.assertGreaterEqual(error(0.1) / error(0.05), 8.0)

    def test_non_finite_state_raises(self):
        _, system, params = load_model('single_integrator')
        scenario = Scenario(
            name='runaway', model='single_integrator', params=params, system=system,
            output=coordinate_output((0,), 1, 1, name='x1'), constraint=band(0.0, 1.0),
            gains=Gains(), nominal=lambda x: np.array([1e308]), initial_state=(0.0,),
            horizon=1.0, dt=0.01, filter_enabled=False,
        )
        with self.assertRaises(NonFiniteState):
            simulate(scenario)

    def test_runs_are_deterministic(self):
        def csv_text():
            stream = io.StringIO()
            write_csv(simulate(double_integrator_scenario(horizon=0.5)), stream)
            return stream.getvalue()

        first, second = csv_text(), csv_text()
        self.assertEqual(first, second)
        header = first.splitlines()[0]
        self.assertEqual(header, 't,x1,x2,u_des1,u_safe1,h,psi,active')
        self.assertEqual(len(first.splitlines()), 52)


class RuntimeTests(SimpleTestCase):
    """A 10 s run at dt = 1e-3 is 10^4 steps and has to finish in under 30 s."""
    STEP_BUDGET_S = 30.0 / 10_000

    def seconds_per_step(self, scenario):
        cbf = build_candidate(scenario)
        start = time.perf_counter()
        log = simulate(scenario, cbf=cbf)
        return (time.perf_counter() - start) / (len(log) - 1)

    def test_quadrotor_ellipse(self):
        self.assertLess(self.seconds_per_step(quadrotor_ellipse_scenario(horizon=1.0)), self.STEP_BUDGET_S)

    def test_cartpole_angle(self):
        self.assertLess(self.seconds_per_step(cartpole_angle_scenario(horizon=1.0)), self.STEP_BUDGET_S)

    def test_cartpole_position(self):
        self.assertLess(self.seconds_per_step(cartpole_position_scenario(horizon=1.0, dt=1e-3)),
                        self.STEP_BUDGET_S)

class WriterTests(SimpleTestCase):
    def setUp(self):
        self.scenario = double_integrator_scenario(horizon=0.2)
        self.cbf = build_candidate(self.scenario)
        self.log = simulate(self.scenario, cbf=self.cbf)

    def test_summary_json(self):
        summary = RunSummary(self.scenario, self.cbf, invariance_report(self.log))
        data = json.loads(render_summary(summary))
        self.assertEqual(data['scenario'], 'double-integrator')
        self.assertTrue(data['invariance']['passed'])
        self.assertEqual(data['candidate']['lambda'], [1.0])
        self.assertEqual(data['invariance']['steps'], 21)
        self.assertEqual(data['final_decision']['u_safe'], self.log.u_safe[-1].tolist())
        self.assertEqual(data['final_decision']['h'], self.log.h[-1])

    def test_plot_script_reads_the_csv(self):
        source = plot_script(self.log, 'out/run.csv', name='double-integrator')
        compile(source, 'plot.py', 'exec')
        self.assertIn("matplotlib.use('Agg')", source)
        self.assertIn("'out/run.csv'", source)
        self.assertIn("'out/run.png'", source)
