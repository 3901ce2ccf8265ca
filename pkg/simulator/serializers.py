"""
Scene and trajectory documents.

``SceneSerializer(data=..., context={'base_dir': ...}).save()`` returns a
SceneSpec; ``TrajectorySerializer(...).save()`` returns a list of Poses.
"""
from pathlib import Path

from rest_framework import serializers

from raster.exceptions import SeafloorError
from raster.files import load_frame
from raster.serializers import VersionedSerializer

from .scene import (
    AlbedoMap,
    Camera,
    ContaminationSpec,
    LightSource,
    Pose,
    SceneSpec,
    WaterColumnSpec,
    WaterProperties,
)
from .sequence import transect


def vector_field(**kwargs):
    return serializers.ListField(child=serializers.FloatField(), min_length=3, max_length=3, **kwargs)


def channel_field(**kwargs):
    return serializers.ListField(child=serializers.FloatField(min_value=0.0), min_length=1, max_length=3, **kwargs)


def range_field(default, **kwargs):
    return serializers.ListField(
        child=serializers.FloatField(min_value=0.0), min_length=2, max_length=2, default=list(default), **kwargs
    )


def check_channel_count(value):
    if len(value) == 2:
        raise serializers.ValidationError("Expected 1 or 3 channel values.")
    return value


class CameraSerializer(serializers.Serializer):
    width = serializers.IntegerField(min_value=1)
    height = serializers.IntegerField(min_value=1)
    focal_length = serializers.FloatField()
    cx = serializers.FloatField(required=False, allow_null=True, default=None)
    cy = serializers.FloatField(required=False, allow_null=True, default=None)

    def validate_focal_length(self, value):
        if value <= 0:
            raise serializers.ValidationError("Ensure this value is greater than 0.")
        return value


class PoseSerializer(serializers.Serializer):
    altitude = serializers.FloatField()
    pitch = serializers.FloatField(default=0.0, min_value=-1.5, max_value=1.5)
    roll = serializers.FloatField(default=0.0, min_value=-1.5, max_value=1.5)
    x = serializers.FloatField(default=0.0)
    y = serializers.FloatField(default=0.0)

    def validate_altitude(self, value):
        if value <= 0:
            raise serializers.ValidationError("Altitude must be greater than 0.")
        return value


class LightSerializer(serializers.Serializer):
    position = vector_field()
    direction = vector_field()
    intensity = channel_field()
    cone_sigma = serializers.FloatField()

    def validate_direction(self, value):
        if not any(value):
            raise serializers.ValidationError("Direction must be non-zero.")
        return value

    def validate_intensity(self, value):
        return check_channel_count(value)

    def validate_cone_sigma(self, value):
        if value <= 0:
            raise serializers.ValidationError("Ensure this value is greater than 0.")
        return value


class WaterSerializer(serializers.Serializer):
    eta = channel_field(default=[0.65, 0.35, 0.30])
    beta_scale = channel_field(default=[0.3, 0.3, 0.3])
    hg_g = serializers.FloatField(default=0.8, min_value=-0.999, max_value=0.999)
    steps = serializers.IntegerField(default=64, min_value=1)
    max_distance = serializers.FloatField(default=20.0)

    def validate_eta(self, value):
        check_channel_count(value)
        if any(v <= 0 for v in value):
            raise serializers.ValidationError("Attenuation must be greater than 0 in every channel.")
        return value

    def validate_beta_scale(self, value):
        return check_channel_count(value)

    def validate_max_distance(self, value):
        if value <= 0:
            raise serializers.ValidationError("Ensure this value is greater than 0.")
        return value


class AlbedoSerializer(serializers.Serializer):
    """Either a generated texture (``base``) or an image file (``image``)"""

    image = serializers.CharField(required=False)
    base = channel_field(required=False)
    texture = serializers.FloatField(default=0.1, min_value=0.0)
    smoothing = serializers.FloatField(default=4.0, min_value=0.0)
    size = serializers.ListField(child=serializers.FloatField(), min_length=2, max_length=2, required=False)
    texel_size = serializers.FloatField()
    origin = serializers.ListField(
        child=serializers.FloatField(), min_length=2, max_length=2, required=False, allow_null=True, default=None
    )
    seed = serializers.IntegerField(default=0)

    def validate_texel_size(self, value):
        if value <= 0:
            raise serializers.ValidationError("Ensure this value is greater than 0.")
        return value

    def validate_base(self, value):
        check_channel_count(value)
        if any(v > 1 for v in value):
            raise serializers.ValidationError("Albedo must lie in [0, 1].")
        return value

    def validate(self, attrs):
        if ('image' in attrs) == ('base' in attrs):
            raise serializers.ValidationError("Give exactly one of 'image' or 'base'.")
        if 'base' in attrs:
            size = attrs.get('size')
            if not size:
                raise serializers.ValidationError({'size': ["Required when the albedo is generated."]})
            if any(v <= 0 for v in size):
                raise serializers.ValidationError({'size': ["Map size must be positive."]})
        return attrs


class ContaminationSerializer(serializers.Serializer):
    rate = serializers.FloatField(default=0.0, min_value=0.0)
    size = range_field((0.05, 0.3))
    bright = range_field((0.8, 1.0))
    dark = range_field((0.0, 0.1))
    bright_fraction = serializers.FloatField(default=0.5, min_value=0.0, max_value=1.0)

    def validate_rate(self, value):
        if value >= 0.5:
            raise serializers.ValidationError("Contamination rate must be below 0.5 (breakdown point exceeded).")
        return value

    def validate(self, attrs):
        for name in ('size', 'bright', 'dark'):
            low, high = attrs[name]
            if low > high:
                raise serializers.ValidationError({name: ["Lower bound exceeds upper bound."]})
            if name != 'size' and high > 1:
                raise serializers.ValidationError({name: ["Albedo must lie in [0, 1]."]})
        if attrs['size'][0] <= 0:
            raise serializers.ValidationError({'size': ["Object size must be positive."]})
        return attrs


class WaterColumnSerializer(serializers.Serializer):
    count = serializers.IntegerField(default=7, min_value=1)
    particle_rate = serializers.FloatField(default=0.05, min_value=0.0, max_value=0.49)
    particle_radius = range_field((1.0, 4.0))

    def validate_particle_radius(self, value):
        if not 0 < value[0] <= value[1]:
            raise serializers.ValidationError("Expected 0 < min <= max.")
        return value


class SceneSerializer(VersionedSerializer):
    camera = CameraSerializer()
    pose = PoseSerializer()
    lights = LightSerializer(many=True, allow_empty=False)
    water = WaterSerializer(required=False, default=dict)
    albedo = AlbedoSerializer()
    contamination = ContaminationSerializer(required=False, default=dict)
    water_column = WaterColumnSerializer(required=False, allow_null=True, default=None)
    seed = serializers.IntegerField(default=0)
    cosine_weighting = serializers.BooleanField(default=True)

    def validate(self, attrs):
        # Channel counts must agree across lights, water and albedo.
        counts = {}
        for position, light in enumerate(attrs['lights']):
            counts[f"lights.{position}.intensity"] = len(light['intensity'])
        water = attrs.get('water') or {}
        for name in ('eta', 'beta_scale'):
            if name in water:
                counts[f"water.{name}"] = len(water[name])
        if 'base' in attrs['albedo']:
            counts['albedo.base'] = len(attrs['albedo']['base'])
        if len({n for n in counts.values() if n != 1}) > 1:
            detail = ', '.join(f"{path}={n}" for path, n in counts.items())
            raise serializers.ValidationError(f"Channel counts disagree: {detail}.")
        return attrs

    def _albedo(self, data):
        origin = tuple(data['origin']) if data.get('origin') is not None else None
        if 'image' in data:
            path = Path(data['image'])
            if not path.is_absolute():
                path = Path(self.context.get('base_dir', '.')) / path
            return AlbedoMap.from_frame(load_frame(path), data['texel_size'], origin or (0.0, 0.0))
        return AlbedoMap.generate(
            data['size'], data['texel_size'], base=data['base'], texture=data['texture'],
            smoothing=data['smoothing'], seed=data['seed'], origin=origin,
        )

    def create(self, validated_data):
        water = {
            key: tuple(value) if isinstance(value, list) else value
            for key, value in (validated_data.get('water') or {}).items()
        }
        contamination = {
            key: tuple(value) if isinstance(value, list) else value
            for key, value in (validated_data.get('contamination') or {}).items()
        }
        column = validated_data.get('water_column')
        try:
            return SceneSpec(
                camera=Camera(**validated_data['camera']),
                pose=Pose(**validated_data['pose']),
                lights=tuple(LightSource(**light) for light in validated_data['lights']),
                water=WaterProperties(**water),
                albedo=self._albedo(validated_data['albedo']),
                contamination=ContaminationSpec(**contamination),
                seed=validated_data['seed'],
                cosine_weighting=validated_data['cosine_weighting'],
                water_column=WaterColumnSpec(
                    count=column['count'],
                    particle_rate=column['particle_rate'],
                    particle_radius=tuple(column['particle_radius']),
                ) if column else None,
            )
        except SeafloorError as exc:
            if isinstance(exc, OSError):
                raise
            raise serializers.ValidationError({'document': [str(exc)]}) from exc


class TransectSerializer(serializers.Serializer):
    start = serializers.ListField(child=serializers.FloatField(), min_length=2, max_length=2)
    step = serializers.ListField(child=serializers.FloatField(), min_length=2, max_length=2)
    count = serializers.IntegerField(min_value=1)
    altitude = serializers.FloatField()
    pitch = serializers.FloatField(default=0.0, min_value=-1.5, max_value=1.5)
    roll = serializers.FloatField(default=0.0, min_value=-1.5, max_value=1.5)

    def validate_altitude(self, value):
        if value <= 0:
            raise serializers.ValidationError("Altitude must be greater than 0.")
        return value


class TrajectorySerializer(VersionedSerializer):
    poses = PoseSerializer(many=True, required=False, allow_empty=False)
    transect = TransectSerializer(required=False)

    def validate(self, attrs):
        if ('poses' in attrs) == ('transect' in attrs):
            raise serializers.ValidationError("Give exactly one of 'poses' or 'transect'.")
        return attrs

    def create(self, validated_data):
        if 'poses' in validated_data:
            return [Pose(**pose) for pose in validated_data['poses']]
        return transect(**validated_data['transect'])
