from rest_framework import serializers

from synthesis.serializers import FiniteFloatField


class FilterDecisionSerializer(serializers.Serializer):
    u_desired = serializers.ListField(child=serializers.FloatField())
    u_safe = serializers.ListField(child=serializers.FloatField())
    constraint_value = FiniteFloatField(allow_null=True)
    active = serializers.BooleanField()
    h = FiniteFloatField(allow_null=True)
