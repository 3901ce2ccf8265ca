"""
Ground-truth comparison that ignores the per-channel scale the enhancement
cannot recover.
"""
import numpy as np

from raster.exceptions import ArgumentError, MetricError
from raster.planes import PlaneSet


def _array(value):
    if isinstance(value, PlaneSet):
        return value.stack()
    array = np.asarray(value, dtype=np.float64)
    return array[np.newaxis] if array.ndim == 2 else array


def scale_invariant_rmse(restored, truth, mask=None):
    """
    Per-channel RMSE of ``s * restored`` against ``truth`` at the best scale
    s = <restored, truth> / <restored, restored>, divided by the mean truth.
    """
    restored, truth = _array(restored), _array(truth)
    if restored.shape != truth.shape:
        raise ArgumentError(f"Restored frame {restored.shape} and truth {truth.shape} differ in shape")
    mask = np.ones(truth.shape[1:], dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if mask.shape != truth.shape[1:]:
        raise ArgumentError(f"Mask {mask.shape} does not match frames {truth.shape[1:]}")
    if not mask.any():
        raise MetricError("Comparison mask is empty")

    errors = []
    for channel, (r, t) in enumerate(zip(restored[:, mask], truth[:, mask])):
        energy = r @ r
        if energy == 0:
            raise MetricError(f"Restored channel {channel} is zero everywhere in the mask")
        mean = t.mean()
        if mean == 0:
            raise MetricError(f"Truth channel {channel} has zero mean in the mask")
        scale = (r @ t) / energy
        errors.append(np.sqrt(np.mean((scale * r - t) ** 2)) / mean)
    return np.array(errors)
