from rest_framework import serializers

from raster.serializers import VersionedSerializer


class RegistrationSerializer(VersionedSerializer):
    """
    Either ``homographies`` (row-major 3x3, frame to mosaic) with
    ``mosaic_shape`` [height, width], or ``correspondence`` map paths.
    """

    homographies = serializers.ListField(
        child=serializers.ListField(child=serializers.FloatField(), min_length=9, max_length=9),
        required=False,
        allow_empty=False,
    )
    mosaic_shape = serializers.ListField(
        child=serializers.IntegerField(min_value=1), min_length=2, max_length=2, required=False
    )
    correspondence = serializers.ListField(child=serializers.CharField(), required=False, allow_empty=False)
    cell_size = serializers.FloatField(required=False, allow_null=True, default=None)

    def validate_cell_size(self, value):
        if value is not None and value <= 0:
            raise serializers.ValidationError("Ensure this value is greater than 0.")
        return value

    def validate(self, attrs):
        if ('homographies' in attrs) == ('correspondence' in attrs):
            raise serializers.ValidationError("Give exactly one of 'homographies' or 'correspondence'.")
        if 'homographies' in attrs and 'mosaic_shape' not in attrs:
            raise serializers.ValidationError({'mosaic_shape': ["Required with homographies."]})
        return attrs


class RegionReportSerializer(serializers.Serializer):
    errors = serializers.ListField(child=serializers.FloatField(min_value=0.0))
    overlap_pixel_count = serializers.IntegerField(min_value=1)


class ConsistencyReportSerializer(VersionedSerializer):
    """Normalized consistency error of a registered frame set"""

    norm = serializers.ChoiceField(choices=['mae', 'rmse'])
    errors = serializers.ListField(child=serializers.FloatField(min_value=0.0))
    overlap_pixel_count = serializers.IntegerField(min_value=1)
    mosaic_shape = serializers.ListField(child=serializers.IntegerField(min_value=1), min_length=2, max_length=2)
    per_frame = serializers.ListField(
        child=serializers.ListField(child=serializers.FloatField(min_value=0.0), allow_null=True)
    )
    regions = serializers.DictField(child=RegionReportSerializer(allow_null=True), required=False)
    truth_rmse = serializers.ListField(
        child=serializers.ListField(child=serializers.FloatField(min_value=0.0)), required=False, allow_null=True
    )
