"""
Box-mean downsampling and bilinear upsampling.

Both operate on the last two axes, so the array variants accept stacked
(channels, height, width) input as well as single planes.
"""
import numpy as np

from .exceptions import ArgumentError
from .planes import ImagePlane


def reduced_size(width, height, factor):
    """Output (width, height) of a downsample by ``factor``"""
    return -(-width // factor), -(-height // factor)


def downsample_array(array, factor):
    """
    Mean over factor x factor boxes; edge boxes average the pixels available.
    """
    if factor < 1:
        raise ArgumentError(f"Downsample factor must be >= 1, got {factor}")
    array = np.asarray(array, dtype=np.float64)
    if factor == 1:
        return array.copy()
    height, width = array.shape[-2:]
    rows = np.arange(0, height, factor)
    cols = np.arange(0, width, factor)
    sums = np.add.reduceat(np.add.reduceat(array, rows, axis=-2), cols, axis=-1)
    counts = np.outer(np.diff(np.append(rows, height)), np.diff(np.append(cols, width)))
    return sums / counts


def downsample(plane, factor):
    return ImagePlane(downsample_array(plane.data, factor))


def _sample_positions(source, target):
    # Align-centers: target pixel i sits at source coordinate (i + 0.5) * s - 0.5.
    x = (np.arange(target) + 0.5) * (source / target) - 0.5
    x = np.clip(x, 0.0, source - 1)
    lo = np.floor(x).astype(np.intp)
    hi = np.minimum(lo + 1, source - 1)
    return lo, hi, x - lo


def upsample_array(array, target_width, target_height):
    """Bilinear interpolation with edge clamping to (target_height, target_width)"""
    if target_width < 1 or target_height < 1:
        raise ArgumentError(f"Target size must be positive, got {target_width}x{target_height}")
    array = np.asarray(array, dtype=np.float64)
    height, width = array.shape[-2:]
    if target_width < width or target_height < height:
        raise ArgumentError(
            f"Upsample target {target_width}x{target_height} is smaller than source {width}x{height}"
        )
    r0, r1, wr = _sample_positions(height, target_height)
    c0, c1, wc = _sample_positions(width, target_width)

    top = array[..., r0, :]
    rows = top + wr[:, np.newaxis] * (array[..., r1, :] - top)
    left = rows[..., c0]
    return left + wc * (rows[..., c1] - left)


def upsample(plane, target_width, target_height):
    return ImagePlane(upsample_array(plane.data, target_width, target_height))
