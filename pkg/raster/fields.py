"""
Persistence for scatter and factor fields.

A field is stored as a 16-bit TIFF whose full code corresponds to the field
maximum, a JSON sidecar recording that scale, and (factor fields only) a
1-bit PNG validity mask.
"""
import logging
from pathlib import Path

from .exceptions import ArgumentError
from .files import load_frame, load_mask, save_frame, save_mask
from .planes import FactorField, Frame, ScatterField
from .serializers import SCHEMA_VERSION, FieldSidecarSerializer, load_document, write_document

logger = logging.getLogger(__name__)


def sidecar_path(path):
    return Path(path).with_suffix('.json')


def mask_path(path):
    path = Path(path)
    return path.with_name(f"{path.stem}_mask.png")


def save_field(field, path, epsilon=None):
    """Write ``field`` to ``path`` (.tif) plus its sidecar and mask"""
    path = Path(path)
    if path.suffix.lower() not in ('.tif', '.tiff'):
        raise ArgumentError(f"Fields are stored as TIFF, got {path}")
    kind = 'factor' if isinstance(field, FactorField) else 'scatter'
    values = field.stack()
    scale = float(values.max())
    save_frame(values / scale if scale > 0 else values, path, depth=16, gamma='linear')

    mask_name = None
    if kind == 'factor':
        save_mask(field.coverage, mask_path(path))
        mask_name = mask_path(path).name

    write_document(sidecar_path(path), {
        'schema': SCHEMA_VERSION,
        'kind': kind,
        'scale': scale,
        'width': field.width,
        'height': field.height,
        'channels': field.channels,
        'mask': mask_name,
        'epsilon': epsilon,
    })
    logger.debug(f"Saved {kind} field to {path} (scale {scale:.6g})")


def load_field(path, expected_kind=None):
    """Read a field written by :func:`save_field`"""
    path = Path(path)
    sidecar = load_document(sidecar_path(path), FieldSidecarSerializer).validated_data
    if expected_kind and sidecar['kind'] != expected_kind:
        raise ArgumentError(f"{path} holds a {sidecar['kind']} field, expected {expected_kind}")

    frame = load_frame(path, gamma='linear')
    if frame.size != (sidecar['width'], sidecar['height']) or frame.channels != sidecar['channels']:
        raise ArgumentError(f"{path} does not match the dimensions recorded in its sidecar")
    values = frame.stack() * sidecar['scale']

    if sidecar['kind'] == 'scatter':
        return ScatterField.from_array(values)

    valid = None
    if sidecar['mask']:
        valid = load_mask(path.with_name(sidecar['mask']))
        if valid.shape != values.shape[1:]:
            raise ArgumentError(f"Validity mask of {path} has the wrong shape {valid.shape}")
    return FactorField(Frame.from_array(values).planes, valid)
