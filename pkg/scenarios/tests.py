import csv
import io
import json
import math
import tempfile
from pathlib import Path

import yaml
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from core.exceptions import ScenarioConfigError

from .builders import build_scenario, check_initial_state
from .loader import dump_config, loads_config, read_config, shipped_config
from .pipeline import run_pipeline

SHIPPED = ('cartpole-position', 'cartpole-angle', 'quadrotor-ellipse', 'quadrotor-z-only', 'double-integrator')

# Small sampling plans so the command tests stay quick.
QUICK = {
    'verification.gradient.samples': 300,
    'verification.rank.samples': 150,
    'verification.cbf.samples': 150,
}


def with_changes(raw: dict, changes: dict) -> dict:
    for dotted, value in changes.items():
        *parents, leaf = dotted.split('.')
        node = raw
        for key in parents:
            node = node.setdefault(key, {})
        node[leaf] = value
    return raw


class TempDirMixin:
    def setUp(self):
        super().setUp()
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.tmp = Path(tmp.name)

    def variant(self, name: str, changes=None, filename=None) -> Path:
        raw = yaml.safe_load(shipped_config(name).read_text(encoding='utf-8'))
        path = self.tmp / (filename or f'{name}.yaml')
        path.write_text(yaml.safe_dump(with_changes(raw, changes or {})), encoding='utf-8')
        return path


class ConfigTests(SimpleTestCase):
    def parse_errors(self, text):
        with self.assertRaises(ScenarioConfigError) as ctx:
            loads_config(text)
        return ctx.exception.context['errors']

    def double_integrator(self, changes):
        raw = yaml.safe_load(shipped_config('double-integrator').read_text(encoding='utf-8'))
        return yaml.safe_dump(with_changes(raw, changes))

    def test_shipped_configs_round_trip(self):
        for name in SHIPPED:
            with self.subTest(name=name):
                config = read_config(shipped_config(name))
                self.assertEqual(loads_config(dump_config(config)), config)

    def test_defaults_are_filled_in(self):
        config = read_config(shipped_config('quadrotor-z-only'))
        self.assertEqual(config['gains']['lambda'], [])
        self.assertEqual(config['gains']['alpha'], {'kind': 'linear', 'slope': 1.0})
        self.assertEqual(config['verification']['cbf']['samples'], 2000)
        self.assertEqual(config['verification']['gradient']['method'], 'lhs')
        self.assertTrue(config['simulation']['filter'])

    def test_lambda_key(self):
        config = read_config(shipped_config('double-integrator'))
        self.assertEqual(config['gains']['lambda'], [1.0])

    def test_unknown_keys_name_their_location(self):
        errors = self.parse_errors(self.double_integrator({'gains.sigmaa': 1.0}))
        self.assertIn('gains.sigmaa: Unknown field.', errors)
        errors = self.parse_errors(self.double_integrator({'nominal.channels': [
            {'position_index': 0, 'velocity_index': 1, 'kq': 1.0}]}))
        self.assertIn('nominal.channels.0.kq: Unknown field.', errors)
        errors = self.parse_errors(self.double_integrator({'colour': 'red'}))
        self.assertIn('colour: Unknown field.', errors)

    def test_constraint_parameters_follow_the_kind(self):
        errors = self.parse_errors(self.double_integrator({'constraint': {'kind': 'band', 'center': [0.0],
                                                                          'limit': 1.0}}))
        self.assertIn('constraint.radius: Required for band constraints.', errors)
        self.assertIn('constraint.limit: Not used by band constraints.', errors)

    def test_unknown_model_parameter(self):
        errors = self.parse_errors(self.double_integrator({'model.params.mass_kg': 1.0}))
        self.assertIn('model.params.mass_kg: Unknown parameter for double_integrator.', errors)

    def test_unknown_model(self):
        errors = self.parse_errors(self.double_integrator({'model.name': 'unicycle'}))
        self.assertTrue(any(error.startswith('model.name:') for error in errors))

    def test_not_yaml(self):
        with self.assertRaises(ScenarioConfigError):
            loads_config('name: [unterminated')

    def test_missing_file(self):
        with self.assertRaises(ScenarioConfigError):
            read_config('/nonexistent/scenario.yaml')


class BuilderTests(SimpleTestCase):
    def test_double_integrator_plans(self):
        built = build_scenario(read_config(shipped_config('double-integrator')))
        self.assertEqual(built.scenario.output.p, 1)
        self.assertEqual(built.rank_plan.box.low, (-1.1, -2.0))
        self.assertEqual(built.cbf_plan.box, built.rank_plan.box)
        self.assertEqual(built.gradient_plan.box.dim, 1)

    def test_cartpole_rank_box_and_velocity_extension(self):
        built = build_scenario(read_config(shipped_config('cartpole-position')))
        box = built.rank_plan.box
        self.assertEqual(box.dim, 2)
        self.assertAlmostEqual(box.low[0], -3.2)
        self.assertAlmostEqual(box.high[0], 1.2)
        self.assertEqual(built.cbf_plan.box.dim, 4)
        self.assertEqual(built.cbf_plan.box.high[2:], (2.0, 2.0))

    def test_rank_box_override(self):
        config = with_changes(read_config(shipped_config('cartpole-angle')),
                              {'verification.rank.low': [-3.0, -math.pi], 'verification.rank.high': [3.0, math.pi]})
        built = build_scenario(config)
        self.assertEqual(built.rank_plan.box.low, (-3.0, -math.pi))

    def test_seed_override_reaches_every_plan(self):
        built = build_scenario(read_config(shipped_config('double-integrator')), seed=7)
        self.assertEqual({built.gradient_plan.seed, built.rank_plan.seed, built.cbf_plan.seed}, {7})
        self.assertEqual(built.scenario.seed, 7)

    def test_initial_state_length_checked(self):
        config = with_changes(read_config(shipped_config('double-integrator')), {'simulation.initial_state': [0.0]})
        with self.assertRaises(ScenarioConfigError):
            check_initial_state(build_scenario(config).scenario)

    def test_channel_count_checked(self):
        config = read_config(shipped_config('quadrotor-ellipse'))
        config['nominal']['channels'] = config['nominal']['channels'][:1]
        with self.assertRaises(ScenarioConfigError):
            build_scenario(config)

    def test_configuration_output_needs_a_mechanical_model(self):
        config = with_changes(read_config(shipped_config('double-integrator')), {'output.domain': 'configuration'})
        with self.assertRaises(ScenarioConfigError):
            build_scenario(config)


class PipelineTests(SimpleTestCase):
    def test_height_only_constraint_stops_at_rank(self):
        config = with_changes(read_config(shipped_config('quadrotor-z-only')), QUICK)
        result = run_pipeline(build_scenario(config))
        self.assertFalse(result.passed)
        self.assertEqual(result.failed_stage, 'rank')
        self.assertIsNone(result.candidate)

    def test_double_integrator_passes_every_stage(self):
        config = with_changes(read_config(shipped_config('double-integrator')), QUICK)
        result = run_pipeline(build_scenario(config))
        self.assertTrue(result.passed, [stage.detail for stage in result.stages])
        self.assertEqual([stage.name for stage in result.stages], ['gradient', 'rank', 'build', 'verify'])
        self.assertIs(result.candidate.rank_report, result.rank_report)


class CheckDegreeCommandTests(TempDirMixin, SimpleTestCase):
    def run_command(self, path, **options):
        out = io.StringIO()
        call_command('check_degree', config=str(path), stdout=out, stderr=io.StringIO(), **options)
        return json.loads(out.getvalue())

    def test_cart_position_has_full_rank(self):
        report = self.run_command(shipped_config('cartpole-position'))
        self.assertTrue(report['rank_ok'])
        self.assertTrue(report['passed'])

    def test_pole_angle_over_full_range_fails_near_vertical(self):
        path = self.variant('cartpole-angle', {'verification.rank.low': [-3.0, -math.pi],
                                               'verification.rank.high': [3.0, math.pi]})
        out_path = self.tmp / 'rank.json'
        with self.assertRaises(CommandError) as ctx:
            self.run_command(path, out=str(out_path))
        self.assertEqual(ctx.exception.returncode, 1)
        report = json.loads(out_path.read_text())
        self.assertFalse(report['rank_ok'])
        self.assertLess(abs(math.cos(report['argmin'][1])), 1e-2)

    def test_pole_angle_on_its_band_passes(self):
        self.assertTrue(self.run_command(shipped_config('cartpole-angle'))['passed'])

    def test_height_only_output_fails(self):
        with self.assertRaises(CommandError) as ctx:
            self.run_command(shipped_config('quadrotor-z-only'))
        self.assertEqual(ctx.exception.returncode, 1)

    def test_configuration_errors_exit_2(self):
        path = self.variant('double-integrator', {'gains.sigmaa': 1.0})
        with self.assertRaises(CommandError) as ctx:
            self.run_command(path)
        self.assertEqual(ctx.exception.returncode, 2)
        self.assertIn('gains.sigmaa: Unknown field.', str(ctx.exception))
        self.assertTrue(str(ctx.exception).startswith('[config]'))
        with self.assertRaises(CommandError) as ctx:
            self.run_command(self.tmp / 'missing.yaml')
        self.assertEqual(ctx.exception.returncode, 2)


class SynthesizeCommandTests(TempDirMixin, SimpleTestCase):
    def run_command(self, path):
        out = io.StringIO()
        call_command('synthesize', config=str(path), stdout=out, stderr=io.StringIO())
        return json.loads(out.getvalue())

    def test_double_integrator(self):
        result = self.run_command(self.variant('double-integrator', QUICK))
        self.assertTrue(result['passed'])
        self.assertEqual(result['candidate']['lambda'], [1.0])
        self.assertEqual(result['cbf_report']['violations'], 0)

    def test_quadrotor_ellipse(self):
        result = self.run_command(self.variant('quadrotor-ellipse', QUICK))
        self.assertTrue(result['passed'])
        self.assertEqual(result['candidate']['form'], 'relative_degree_2')
        self.assertTrue(result['rank_report']['passed'])

    def test_wide_attitude_ellipse_fails_at_rank(self):
        path = self.variant('quadrotor-ellipse', {**QUICK, 'constraint.radii': [1.0, 1.6]})
        out_path = self.tmp / 'result.json'
        with self.assertRaises(CommandError) as ctx:
            call_command('synthesize', config=str(path), out=str(out_path), stderr=io.StringIO())
        self.assertEqual(ctx.exception.returncode, 1)
        self.assertIn('rank stage failed', str(ctx.exception))
        result = json.loads(out_path.read_text())
        self.assertEqual(result['failed_stage'], 'rank')
        self.assertIsNone(result['candidate'])

    def test_height_only_fails_at_rank(self):
        with self.assertRaises(CommandError) as ctx:
            self.run_command(self.variant('quadrotor-z-only', QUICK))
        self.assertEqual(ctx.exception.returncode, 1)


class SimulateCommandTests(TempDirMixin, SimpleTestCase):
    def run_command(self, path, csv_path, **options):
        call_command('simulate', config=str(path), csv=str(csv_path), stdout=io.StringIO(),
                     stderr=io.StringIO(), **options)

    def read_rows(self, csv_path):
        with open(csv_path, newline='') as f:
            return list(csv.DictReader(f))

    def test_double_integrator_writes_every_artifact(self):
        csv_path = self.tmp / 'out' / 'run.csv'
        self.run_command(self.variant('double-integrator', QUICK), csv_path, horizon=2.0, dt=0.01)
        rows = self.read_rows(csv_path)
        self.assertEqual(len(rows), 201)
        self.assertEqual(list(rows[0]), ['t', 'x1', 'x2', 'u_des1', 'u_safe1', 'h', 'psi', 'active'])
        summary = json.loads((self.tmp / 'out' / 'run.json').read_text())
        self.assertTrue(summary['invariance']['passed'])
        self.assertGreaterEqual(summary['invariance']['min_h'], -1e-3)
        self.assertGreater(summary['invariance']['active_fraction'], 0.0)
        self.assertIn("matplotlib.use('Agg')", (self.tmp / 'out' / 'run_plot.py').read_text())

    def test_unfiltered_run_fails(self):
        with self.assertRaises(CommandError) as ctx:
            self.run_command(self.variant('double-integrator', QUICK), self.tmp / 'raw.csv',
                             horizon=2.0, dt=0.01, no_filter=True)
        self.assertEqual(ctx.exception.returncode, 1)
        rows = self.read_rows(self.tmp / 'raw.csv')
        self.assertLess(min(float(row['psi']) for row in rows), 0.0)

    def test_same_seed_same_bytes(self):
        path = self.variant('double-integrator', QUICK)
        self.run_command(path, self.tmp / 'a.csv', horizon=0.5, dt=0.01, seed=3)
        self.run_command(path, self.tmp / 'b.csv', horizon=0.5, dt=0.01, seed=3)
        self.assertEqual((self.tmp / 'a.csv').read_bytes(), (self.tmp / 'b.csv').read_bytes())

    def test_cart_stays_left_of_the_limit(self):
        csv_path = self.tmp / 'cart.csv'
        self.run_command(self.variant('cartpole-position', QUICK), csv_path, horizon=2.0, dt=5e-3)
        rows = self.read_rows(csv_path)
        self.assertLessEqual(max(float(row['x1']) for row in rows), 1.0 + 1e-3)
        self.assertGreaterEqual(min(float(row['h']) for row in rows), -1e-3)
        self.assertTrue(all(float(row['psi']) >= float(row['h']) for row in rows))

    def test_quadrotor_settles_on_the_lowest_height(self):
        csv_path = self.tmp / 'quad.csv'
        self.run_command(self.variant('quadrotor-ellipse', QUICK), csv_path, horizon=10.0, dt=0.02)
        rows = self.read_rows(csv_path)
        heights = [float(row['x2']) for row in rows]
        self.assertGreaterEqual(min(heights), 1.0 - 1e-3)
        self.assertLessEqual(abs(heights[-1] - 1.0), 0.02)
        self.assertTrue(all(abs(float(row['x3'])) <= 1.0 + 1e-3 for row in rows))

    def test_pole_stays_within_a_quarter_turn_of_upright(self):
        csv_path = self.tmp / 'pole.csv'
        self.run_command(self.variant('cartpole-angle', QUICK), csv_path, dt=0.01)
        rows = self.read_rows(csv_path)
        self.assertEqual(len(rows), 1001)
        deviation = max(abs(float(row['x2']) - math.pi) for row in rows)
        self.assertLessEqual(deviation, math.pi / 4 + 1e-3)
        self.assertGreaterEqual(min(float(row['h']) for row in rows), -1e-3)
        summary = json.loads((self.tmp / 'pole.json').read_text())
        self.assertTrue(summary['invariance']['passed'])
        self.assertEqual(summary['final_decision']['u_desired'], [0.0])

    def test_unfiltered_summary_has_no_barrier_value(self):
        csv_path = self.tmp / 'raw.csv'
        with self.assertRaises(CommandError):
            self.run_command(self.variant('double-integrator', QUICK), csv_path, horizon=2.0, dt=0.01,
                             no_filter=True)
        decision = json.loads((self.tmp / 'raw.json').read_text())['final_decision']
        self.assertIsNone(decision['h'])
        self.assertIsNone(decision['constraint_value'])
        self.assertFalse(decision['active'])

    def test_bad_step_is_a_configuration_error(self):
        with self.assertRaises(CommandError) as ctx:
            self.run_command(self.variant('double-integrator'), self.tmp / 'x.csv', dt=0.0)
        self.assertEqual(ctx.exception.returncode, 2)

    def test_initial_state_outside_the_safe_set(self):
        path = self.variant('double-integrator', {**QUICK, 'simulation.initial_state': [1.5, 0.0]})
        with self.assertRaises(CommandError) as ctx:
            self.run_command(path, self.tmp / 'x.csv', horizon=0.1, dt=0.01)
        self.assertEqual(ctx.exception.returncode, 1)
        self.assertIn('[initial_state]', str(ctx.exception))
