import math

from rest_framework import serializers

from lie.serializers import RankReportSerializer


class FiniteFloatField(serializers.FloatField):
    """Float that renders infinities and NaN as null, which strict JSON cannot carry."""

    def to_representation(self, value):
        value = float(value)
        return value if math.isfinite(value) else None


class ClassKInfinitySerializer(serializers.Serializer):
    kind = serializers.CharField()
    slope = serializers.FloatField()
    lipschitz_constant = serializers.FloatField(read_only=True)


class OutputConstraintSerializer(serializers.Serializer):
    name = serializers.CharField()
    kind = serializers.CharField()
    params = serializers.DictField()
    c1_low = serializers.ListField(source='c1_box.low', child=serializers.FloatField())
    c1_high = serializers.ListField(source='c1_box.high', child=serializers.FloatField())
    d1_low = serializers.ListField(source='d1_domain.low', child=serializers.FloatField())
    d1_high = serializers.ListField(source='d1_domain.high', child=serializers.FloatField())


class ConditionReportSerializer(serializers.Serializer):
    name = serializers.CharField()
    sampled = serializers.IntegerField()
    accepted = serializers.IntegerField()
    min_margin = FiniteFloatField(allow_null=True)
    violations = serializers.IntegerField()
    passed = serializers.BooleanField(read_only=True)
    witnesses = serializers.ListField(child=serializers.ListField(child=serializers.FloatField()))


class CbfCandidateSerializer(serializers.Serializer):
    """Candidate metadata: gains, relative degree and the reports it was built with."""
    form = serializers.CharField()
    system = serializers.CharField(source='system.name')
    output = serializers.CharField(source='output.name')
    output_dimension = serializers.IntegerField(source='output.p')
    relative_degree = serializers.IntegerField(source='gamma')
    mu = serializers.ListField(child=serializers.FloatField())
    lam = serializers.ListField(child=serializers.FloatField())
    sigma = serializers.FloatField()
    alpha = ClassKInfinitySerializer()
    constraint = OutputConstraintSerializer()
    rank_report = RankReportSerializer(allow_null=True)

    def to_representation(self, instance):
        data = super().to_representation(instance)
        data['lambda'] = data.pop('lam')
        return data
