from collections.abc import Mapping
from pathlib import Path

import yaml

from core.exceptions import ScenarioConfigError

from .serializers import ScenarioConfigSerializer, flatten_errors

CONFIG_DIR = Path(__file__).resolve().parent / 'configs'


def _plain(value):
    if isinstance(value, Mapping):
        return {str(key): _plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    return value


def parse_config(raw, source: str = '<config>') -> dict:
    """Validate a decoded scenario tree; the result has every default filled in."""
    serializer = ScenarioConfigSerializer(data=raw)
    if not serializer.is_valid():
        errors = list(flatten_errors(serializer.errors))
        raise ScenarioConfigError(f'{source}: invalid scenario\n  ' + '\n  '.join(errors),
                                  source=source, errors=errors)
    return _plain(serializer.validated_data)


def loads_config(text: str, source: str = '<config>') -> dict:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioConfigError(f'{source}: not valid YAML: {exc}', source=source)
    return parse_config(raw if raw is not None else {}, source)


def read_config(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as exc:
        raise ScenarioConfigError(f'Cannot read {path}: {exc.strerror or exc}.', source=str(path))
    return loads_config(text, str(path))


def dump_config(config: dict) -> str:
    return yaml.safe_dump(_plain(config), sort_keys=False, default_flow_style=None)


def shipped_config(name: str) -> Path:
    return CONFIG_DIR / f'{name}.yaml'
