from rest_framework.renderers import JSONRenderer

from lie.serializers import RankReportSerializer
from lie.verification import verify_relative_degree
from scenarios.commands import ScenarioCommand


class Command(ScenarioCommand):
    help = 'Check the relative degree of the scenario output over its rank box and print the rank report.'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--out', default=None, help='Write the JSON report here instead of stdout.')

    def handle(self, *args, **options):
        built = self.load(options)
        scenario = built.scenario
        report = verify_relative_degree(scenario.system, scenario.output, built.rank_plan)
        self.emit(JSONRenderer().render(RankReportSerializer(report).data, renderer_context={'indent': 2}),
                  options['out'])
        if not report.passed:
            self.fail(f'{scenario.name}: relative degree {scenario.output.gamma} fails, '
                      f'min singular value {report.min_singular_value:.3e}.')
        self.stderr.write(self.style.SUCCESS(
            f'{scenario.name}: relative degree {scenario.output.gamma} holds over {report.sampled_points} points.'))
