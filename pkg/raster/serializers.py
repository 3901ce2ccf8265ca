"""
JSON document helpers and the field sidecar schema.

Every JSON document the project reads or writes carries ``"schema": 1`` and
is validated with a DRF serializer.
"""
import json
from pathlib import Path

from rest_framework import serializers

from .exceptions import ImageIOError

SCHEMA_VERSION = 1


class VersionedSerializer(serializers.Serializer):
    """Base serializer enforcing the document schema version"""

    schema = serializers.IntegerField()

    def validate_schema(self, value):
        if value != SCHEMA_VERSION:
            raise serializers.ValidationError(
                f"Unsupported schema version {value}; expected {SCHEMA_VERSION}."
            )
        return value


class FieldSidecarSerializer(VersionedSerializer):
    """Sidecar describing a persisted scatter or factor field"""

    kind = serializers.ChoiceField(choices=['scatter', 'factor'])
    scale = serializers.FloatField(min_value=0.0)
    width = serializers.IntegerField(min_value=1)
    height = serializers.IntegerField(min_value=1)
    channels = serializers.ChoiceField(choices=[1, 3])
    mask = serializers.CharField(allow_null=True, required=False, default=None)
    epsilon = serializers.FloatField(min_value=0.0, allow_null=True, required=False, default=None)


def flatten_errors(detail, prefix=''):
    """
    Turn nested DRF error details into ``["lights.0.cone_sigma: ...", ...]``.
    """
    messages = []
    if isinstance(detail, dict):
        for key, value in detail.items():
            path = f"{prefix}.{key}" if prefix else str(key)
            if key == 'non_field_errors' and prefix:
                path = prefix
            messages.extend(flatten_errors(value, path))
    elif isinstance(detail, list):
        if all(not isinstance(item, (dict, list)) for item in detail):
            messages.extend(f"{prefix or 'document'}: {item}" for item in detail)
        else:
            for position, item in enumerate(detail):
                if item:
                    messages.extend(flatten_errors(item, f"{prefix}.{position}" if prefix else str(position)))
    else:
        messages.append(f"{prefix or 'document'}: {detail}")
    return messages


def read_document(path):
    """Load a JSON file; syntax errors surface as validation errors"""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ImageIOError(f"Cannot read {path}: {exc}", path) from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise serializers.ValidationError({'document': [f"Invalid JSON in {path}: {exc}"]}) from exc


def load_document(path, serializer_class, **kwargs):
    """Read and validate a JSON document, returning the bound serializer"""
    serializer = serializer_class(data=read_document(path), **kwargs)
    serializer.is_valid(raise_exception=True)
    return serializer


def write_document(path, data):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(data, indent=2))
    except OSError as exc:
        raise ImageIOError(f"Failed to write {path}: {exc}", path) from exc
