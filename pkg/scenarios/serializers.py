"""
Scenario file schema.

Every section rejects keys it does not know; ``flatten_errors`` turns the
nested DRF error dict into ``section.key: message`` lines.
"""
from collections.abc import Mapping

from rest_framework import serializers
from rest_framework.settings import api_settings

from core.conf import barrier_settings
from lie.models import DOMAIN_KINDS
from lie.serializers import RankReportSerializer
from synthesis.constraints import CONSTRAINT_KINDS
from synthesis.models import ALPHA_KINDS
from synthesis.serializers import CbfCandidateSerializer, ConditionReportSerializer
from systems.zoo import MODEL_ZOO

SAMPLING_METHODS = [('lhs', 'lhs'), ('grid', 'grid')]


class StrictSerializer(serializers.Serializer):
    """Rejects unknown keys and fills in optional nested sections from their defaults."""

    def to_internal_value(self, data):
        if isinstance(data, Mapping):
            unknown = sorted(str(key) for key in data if key not in self.fields)
            if unknown:
                raise serializers.ValidationError({key: ['Unknown field.'] for key in unknown})
            data = dict(data)
            for name, field in self.fields.items():
                if isinstance(field, serializers.Serializer) and not field.required and name not in data:
                    data[name] = {}
        return super().to_internal_value(data)


def flatten_errors(detail, prefix=''):
    """Yield ``dotted.path: message`` for every message in a DRF error structure."""
    if isinstance(detail, Mapping):
        for key, value in detail.items():
            if key == api_settings.NON_FIELD_ERRORS_KEY:
                yield from flatten_errors(value, prefix)
            else:
                yield from flatten_errors(value, f'{prefix}.{key}' if prefix else str(key))
    elif isinstance(detail, list):
        if all(isinstance(item, str) for item in detail):
            for message in detail:
                yield f'{prefix or "config"}: {message}'
        else:
            for index, item in enumerate(detail):
                if item:
                    yield from flatten_errors(item, f'{prefix}.{index}' if prefix else str(index))
    else:
        yield f'{prefix or "config"}: {detail}'


def _positive(value, what='Value'):
    if not value > 0:
        raise serializers.ValidationError(f'{what} must be positive.')
    return value


class ModelSectionSerializer(StrictSerializer):
    name = serializers.ChoiceField(choices=[(name, name) for name in sorted(MODEL_ZOO)])
    params = serializers.DictField(child=serializers.FloatField(), default=dict)

    def validate(self, attrs):
        entry = MODEL_ZOO[attrs['name']]
        unknown = sorted(set(attrs['params']) - set(entry.default_params))
        if unknown:
            raise serializers.ValidationError(
                {'params': {key: [f'Unknown parameter for {entry.name}.'] for key in unknown}})
        return attrs


class OutputSectionSerializer(StrictSerializer):
    kind = serializers.ChoiceField(choices=[('coordinates', 'coordinates'), ('actuated', 'actuated')],
                                   default='coordinates')
    indices = serializers.ListField(child=serializers.IntegerField(min_value=0), default=list)
    domain = serializers.ChoiceField(choices=[(kind, kind) for kind in DOMAIN_KINDS], default='state')
    relative_degree = serializers.IntegerField(min_value=1, default=2)
    name = serializers.CharField(default='', allow_blank=True)

    def validate(self, attrs):
        if attrs['kind'] == 'coordinates' and not attrs['indices']:
            raise serializers.ValidationError({'indices': ['Coordinate outputs need at least one index.']})
        if attrs['kind'] == 'actuated':
            if attrs['indices']:
                raise serializers.ValidationError({'indices': ['Actuated outputs take no indices.']})
            if attrs['domain'] != 'configuration' or attrs['relative_degree'] != 2:
                raise serializers.ValidationError(
                    'Actuated outputs are configuration outputs of relative degree 2.')
        return attrs


class ConstraintSectionSerializer(StrictSerializer):
    PARAMETERS = {
        'upper_bound': ('limit', 'low'),
        'lower_bound': ('limit', 'high'),
        'band': ('center', 'radius'),
        'ellipse': ('center', 'radii'),
    }

    kind = serializers.ChoiceField(choices=[(kind, kind) for kind in CONSTRAINT_KINDS])
    name = serializers.CharField(default='', allow_blank=True)
    limit = serializers.FloatField(required=False)
    low = serializers.FloatField(required=False)
    high = serializers.FloatField(required=False)
    radius = serializers.FloatField(required=False)
    center = serializers.ListField(child=serializers.FloatField(), min_length=1, required=False)
    radii = serializers.ListField(child=serializers.FloatField(), min_length=1, required=False)

    def validate(self, attrs):
        kind = attrs['kind']
        needed = self.PARAMETERS[kind]
        errors = {}
        for key in needed:
            if key not in attrs:
                errors[key] = [f'Required for {kind} constraints.']
        for key in set(attrs) - set(needed) - {'kind', 'name'}:
            errors[key] = [f'Not used by {kind} constraints.']
        if errors:
            raise serializers.ValidationError(errors)
        if 'radius' in attrs and not attrs['radius'] > 0:
            raise serializers.ValidationError({'radius': ['Radius must be positive.']})
        if kind == 'ellipse':
            if len(attrs['radii']) != len(attrs['center']):
                raise serializers.ValidationError({'radii': ['Needs one radius per center coordinate.']})
            if any(r <= 0 for r in attrs['radii']):
                raise serializers.ValidationError({'radii': ['Radii must be positive.']})
        if kind == 'upper_bound' and not attrs['low'] < attrs['limit']:
            raise serializers.ValidationError({'low': ['Must lie below the limit.']})
        if kind == 'lower_bound' and not attrs['high'] > attrs['limit']:
            raise serializers.ValidationError({'high': ['Must lie above the limit.']})
        return attrs


class AlphaSerializer(StrictSerializer):
    kind = serializers.ChoiceField(choices=[(kind, kind) for kind in ALPHA_KINDS], default='linear')
    slope = serializers.FloatField(default=1.0)

    def validate_slope(self, value):
        return _positive(value, 'Slope')


class GainsSerializer(StrictSerializer):
    alpha = AlphaSerializer(required=False)
    mu = serializers.ListField(child=serializers.FloatField(), default=lambda: [1.0])
    sigma = serializers.FloatField(default=1.0)

    def get_fields(self):
        fields = super().get_fields()
        # ``lambda`` cannot be spelled as a class attribute.
        fields['lambda'] = serializers.ListField(child=serializers.FloatField(), default=list)
        return fields

    def validate_sigma(self, value):
        return _positive(value, 'Sigma')


class PdChannelSerializer(StrictSerializer):
    position_index = serializers.IntegerField(min_value=0)
    velocity_index = serializers.IntegerField(min_value=0)
    target = serializers.FloatField(default=0.0)
    kp = serializers.FloatField(default=5.0)
    kd = serializers.FloatField(default=2.0)
    scale = serializers.FloatField(default=1.0)
    offset = serializers.FloatField(default=0.0)


class NominalSerializer(StrictSerializer):
    kind = serializers.ChoiceField(choices=[('zero', 'zero'), ('pd', 'pd')], default='zero')
    channels = PdChannelSerializer(many=True, default=list)

    def validate(self, attrs):
        if attrs['kind'] == 'pd' and not attrs['channels']:
            raise serializers.ValidationError({'channels': ['A PD controller needs one channel per input.']})
        if attrs['kind'] == 'zero' and attrs['channels']:
            raise serializers.ValidationError({'channels': ['The zero controller takes no channels.']})
        return attrs


class SimulationSerializer(StrictSerializer):
    initial_state = serializers.ListField(child=serializers.FloatField(), default=list)
    horizon_s = serializers.FloatField(min_value=0.0, default=lambda: barrier_settings.DEFAULT_HORIZON)
    dt_s = serializers.FloatField(default=lambda: barrier_settings.DEFAULT_DT)
    filter = serializers.BooleanField(default=True)

    def validate_dt_s(self, value):
        return _positive(value, 'Step')


class GradientPlanSerializer(StrictSerializer):
    samples = serializers.IntegerField(min_value=1, default=lambda: barrier_settings.GRADIENT_SAMPLES)
    method = serializers.ChoiceField(choices=SAMPLING_METHODS, default='lhs')


class RankPlanSerializer(StrictSerializer):
    samples = serializers.IntegerField(min_value=1, default=lambda: barrier_settings.RANK_SAMPLES)
    method = serializers.ChoiceField(choices=SAMPLING_METHODS, default='lhs')
    low = serializers.ListField(child=serializers.FloatField(), min_length=1, required=False)
    high = serializers.ListField(child=serializers.FloatField(), min_length=1, required=False)

    def validate(self, attrs):
        if ('low' in attrs) != ('high' in attrs):
            raise serializers.ValidationError('Give both low and high, or neither.')
        if 'low' in attrs:
            if len(attrs['low']) != len(attrs['high']):
                raise serializers.ValidationError({'high': ['Must have as many entries as low.']})
            if any(lo > hi for lo, hi in zip(attrs['low'], attrs['high'])):
                raise serializers.ValidationError({'high': ['Every entry must be at least its low entry.']})
        return attrs


class CbfPlanSerializer(StrictSerializer):
    samples = serializers.IntegerField(min_value=1, default=lambda: barrier_settings.CBF_SAMPLES)
    method = serializers.ChoiceField(choices=SAMPLING_METHODS, default='lhs')
    velocity_limit = serializers.FloatField(default=lambda: barrier_settings.VELOCITY_LIMIT)
    inflation = serializers.FloatField(min_value=0.0, default=lambda: barrier_settings.SAFE_SET_INFLATION)

    def validate_velocity_limit(self, value):
        return _positive(value, 'Velocity limit')


class VerificationSerializer(StrictSerializer):
    seed = serializers.IntegerField(min_value=0, default=0)
    gradient = GradientPlanSerializer(required=False)
    rank = RankPlanSerializer(required=False)
    cbf = CbfPlanSerializer(required=False)


class ScenarioConfigSerializer(StrictSerializer):
    name = serializers.CharField()
    description = serializers.CharField(default='', allow_blank=True)
    model = ModelSectionSerializer()
    output = OutputSectionSerializer()
    constraint = ConstraintSectionSerializer()
    gains = GainsSerializer(required=False)
    nominal = NominalSerializer(required=False)
    simulation = SimulationSerializer(required=False)
    verification = VerificationSerializer(required=False)


class StageResultSerializer(serializers.Serializer):
    name = serializers.CharField()
    passed = serializers.BooleanField()
    detail = serializers.CharField()


class PipelineResultSerializer(serializers.Serializer):
    scenario = serializers.CharField()
    passed = serializers.BooleanField(read_only=True)
    failed_stage = serializers.CharField(allow_null=True, read_only=True)
    stages = StageResultSerializer(many=True)
    sontag_report = ConditionReportSerializer(allow_null=True)
    rank_report = RankReportSerializer(allow_null=True)
    candidate = CbfCandidateSerializer(allow_null=True)
    cbf_report = ConditionReportSerializer(allow_null=True)
