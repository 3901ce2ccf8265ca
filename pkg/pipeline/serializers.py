from rest_framework import serializers

from raster.serializers import VersionedSerializer


class RunReportSerializer(VersionedSerializer):
    """Per-run statistics written next to the enhanced frames"""

    frames = serializers.IntegerField(min_value=0)
    window_sizes = serializers.ListField(child=serializers.IntegerField(min_value=1))
    invalid_fraction = serializers.ListField(child=serializers.FloatField(min_value=0.0, max_value=1.0))
    ms_per_frame = serializers.ListField(child=serializers.FloatField(min_value=0.0))
    factor_mean = serializers.ListField(child=serializers.ListField(child=serializers.FloatField()))
    frames_per_second = serializers.FloatField(min_value=0.0)
    complete = serializers.BooleanField()
    static_factor = serializers.BooleanField()
    config = serializers.DictField()

    def validate(self, attrs):
        count = attrs['frames']
        for name in ('window_sizes', 'invalid_fraction', 'ms_per_frame', 'factor_mean'):
            if len(attrs[name]) != count:
                raise serializers.ValidationError({name: f"Expected {count} entries, got {len(attrs[name])}."})
        return attrs
