import io
from pathlib import Path

from django.core.management.base import CommandError

from core.exceptions import BarrierError
from scenarios.commands import CONFIG_ERROR, ScenarioCommand, write_bytes
from scenarios.pipeline import run_pipeline
from sim.runner import invariance_report, simulate
from sim.writers import RunSummary, plot_script, render_summary, write_csv


class Command(ScenarioCommand):
    help = 'Build the barrier for a scenario, simulate the filtered closed loop and write the trajectory.'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--csv', default=None, help='Trajectory CSV; stdout when omitted.')
        parser.add_argument('--summary', default=None, help='JSON summary; defaults to the CSV path with .json.')
        parser.add_argument('--plot', default=None, help='Plot script; defaults to <csv stem>_plot.py.')
        parser.add_argument('--dt', type=float, default=None, help='Step in seconds.')
        parser.add_argument('--horizon', type=float, default=None, help='Horizon in seconds.')
        parser.add_argument('--no-filter', action='store_true', help='Apply the nominal input unfiltered.')

    def handle(self, *args, **options):
        if options['dt'] is not None and not options['dt'] > 0:
            raise CommandError('--dt must be positive.', returncode=CONFIG_ERROR)
        if options['horizon'] is not None and options['horizon'] < 0:
            raise CommandError('--horizon must not be negative.', returncode=CONFIG_ERROR)
        built = self.load(options, simulating=True, dt=options['dt'], horizon=options['horizon'],
                          filter_enabled=False if options['no_filter'] else None)
        scenario = built.scenario
        result = run_pipeline(built, stages=('gradient', 'rank', 'build'))
        if not result.passed:
            self.fail(f'{scenario.name}: {result.failed_stage} stage failed. {result.stages[-1].detail}')
        try:
            log = simulate(scenario, cbf=result.candidate)
        except BarrierError as exc:
            self.fail(f'{scenario.name}: simulation stopped. {exc.detail}', code=exc.code)
        report = invariance_report(log)

        stream = io.StringIO()
        write_csv(log, stream)
        csv_path = options['csv']
        if csv_path:
            write_bytes(csv_path, stream.getvalue().encode('utf-8'))
        else:
            self.stdout.write(stream.getvalue(), ending='')
        summary_path = options['summary'] or (Path(csv_path).with_suffix('.json') if csv_path else None)
        if summary_path:
            summary = RunSummary(scenario, result.candidate, report, log.final_decision)
            write_bytes(summary_path, render_summary(summary))
        plot_path = options['plot'] or (Path(csv_path).with_name(f'{Path(csv_path).stem}_plot.py')
                                        if csv_path else None)
        if plot_path:
            source = plot_script(log, csv_path or 'trajectory.csv', name=scenario.name, script=Path(plot_path).name)
            write_bytes(plot_path, source.encode('utf-8'))

        if not report.passed:
            self.fail(f'{scenario.name}: trajectory leaves the safe set, min h {report.min_h:.3e}, '
                      f'min psi {report.min_psi:.3e}.')
        self.stderr.write(self.style.SUCCESS(
            f'{scenario.name}: {report.steps} steps, min h {report.min_h:.3e}, min psi {report.min_psi:.3e}.'))
