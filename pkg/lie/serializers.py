from rest_framework import serializers


class RankReportSerializer(serializers.Serializer):
    sampled_points = serializers.IntegerField()
    min_singular_value = serializers.FloatField()
    tolerance = serializers.FloatField()
    rank_ok = serializers.BooleanField()
    zero_ok = serializers.BooleanField()
    max_zero_norm = serializers.FloatField()
    passed = serializers.BooleanField(read_only=True)
    argmin = serializers.ListField(child=serializers.FloatField())
    witnesses = serializers.ListField(child=serializers.ListField(child=serializers.FloatField()))
