from rest_framework.renderers import JSONRenderer

from scenarios.commands import ScenarioCommand
from scenarios.pipeline import run_pipeline
from scenarios.serializers import PipelineResultSerializer


class Command(ScenarioCommand):
    help = 'Run the gradient, rank, construction and barrier checks for a scenario and print the candidate.'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--out', default=None, help='Write the JSON result here instead of stdout.')

    def handle(self, *args, **options):
        built = self.load(options)
        result = run_pipeline(built)
        self.emit(JSONRenderer().render(PipelineResultSerializer(result).data, renderer_context={'indent': 2}),
                  options['out'])
        if not result.passed:
            detail = result.stages[-1].detail
            self.fail(f'{result.scenario}: {result.failed_stage} stage failed. {detail}')
        self.stderr.write(self.style.SUCCESS(f'{result.scenario}: barrier certified.'))
