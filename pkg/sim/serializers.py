from rest_framework import serializers

from filters.serializers import FilterDecisionSerializer
from synthesis.serializers import CbfCandidateSerializer, FiniteFloatField


class InvarianceReportSerializer(serializers.Serializer):
    steps = serializers.IntegerField()
    min_h = FiniteFloatField(allow_null=True)
    min_psi = FiniteFloatField(allow_null=True)
    max_violation = FiniteFloatField(allow_null=True)
    active_fraction = serializers.FloatField()
    psi_dominates_h = serializers.BooleanField()
    tolerance = serializers.FloatField()
    passed = serializers.BooleanField(read_only=True)
    final_state = serializers.ListField(child=FiniteFloatField(allow_null=True))


class RunSummarySerializer(serializers.Serializer):
    scenario = serializers.CharField(source='scenario.name')
    model = serializers.CharField(source='scenario.model')
    params = serializers.DictField(source='scenario.params')
    filter_enabled = serializers.BooleanField(source='scenario.filter_enabled')
    dt_s = serializers.FloatField(source='scenario.dt')
    horizon_s = serializers.FloatField(source='scenario.horizon')
    seed = serializers.IntegerField(source='scenario.seed')
    initial_state = serializers.ListField(source='scenario.initial_state', child=serializers.FloatField())
    candidate = CbfCandidateSerializer()
    invariance = InvarianceReportSerializer()
    final_decision = FilterDecisionSerializer(allow_null=True)
