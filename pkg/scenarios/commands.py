from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from core.exceptions import ScenarioConfigError

from .builders import BuiltScenario, build_scenario, check_initial_state
from .loader import read_config

CONFIG_ERROR = 2
CHECK_FAILED = 1


class ScenarioCommand(BaseCommand):
    """Shared ``--config``/``--seed`` handling; exit 2 on configuration errors, 1 on failed checks."""

    def add_arguments(self, parser):
        parser.add_argument('--config', required=True, help='Scenario YAML file.')
        parser.add_argument('--seed', type=int, default=None, help='Override verification.seed.')

    def load(self, options, simulating=False, **overrides) -> BuiltScenario:
        try:
            built = build_scenario(read_config(options['config']), seed=options['seed'], **overrides)
            if simulating:
                check_initial_state(built.scenario)
            return built
        except ScenarioConfigError as exc:
            raise CommandError(f'[{exc.code}] {exc.detail}', returncode=CONFIG_ERROR)

    def emit(self, data: bytes, path=None) -> None:
        if path:
            write_bytes(path, data)
        else:
            self.stdout.write(data.decode('utf-8'))

    def fail(self, message: str, code: str = ''):
        """Exit 1; ``code`` is the ``BarrierError.code`` of the underlying failure, if any."""
        raise CommandError(f'[{code}] {message}' if code else message, returncode=CHECK_FAILED)


def write_bytes(path, data: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)
    return path
