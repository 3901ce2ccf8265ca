"""
Exact temporal and spatial medians.

Medians are exact order statistics (no histogram approximations); even-sized
samples use the midpoint of the two central values.
"""
import cv2
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

from raster.exceptions import ArgumentError
from raster.parallel import map_row_bands
from raster.planes import ImagePlane

# cv2.medianBlur accepts float32 input only for 3x3 and 5x5 windows.
BLUR_RADII = (1, 2)


def temporal_median_array(stack):
    """Median over axis 0 of a (k, ..., height, width) stack"""
    stack = np.asarray(stack, dtype=np.float64)
    if stack.shape[0] == 0:
        raise ArgumentError("Temporal median of an empty stack")
    if stack.shape[0] == 1:
        return stack[0].copy()
    return map_row_bands(lambda band: np.median(band, axis=0), stack)


def temporal_median(stack):
    """Per-pixel median across a list of equally sized planes"""
    planes = list(stack)
    if not planes:
        raise ArgumentError("Temporal median needs at least one plane")
    if len({plane.shape for plane in planes}) != 1:
        raise ArgumentError("All planes in a temporal median must share dimensions")
    return ImagePlane(temporal_median_array(np.stack([plane.data for plane in planes])))


def _clipped_borders(array, radius, out):
    # Border pixels take the median of the in-bounds part of their window.
    height, width = array.shape[-2:]
    lead = [(0, 0)] * (array.ndim - 2)
    padded = np.pad(array, lead + [(radius, radius), (radius, radius)], constant_values=np.nan)
    windows = sliding_window_view(padded, (2 * radius + 1, 2 * radius + 1), axis=(-2, -1))
    strips = [
        (slice(0, min(radius, height)), slice(None)),
        (slice(max(height - radius, 0), height), slice(None)),
        (slice(None), slice(0, min(radius, width))),
        (slice(None), slice(max(width - radius, 0), width)),
    ]
    for rows, cols in strips:
        block = windows[..., rows, cols, :, :]
        flat = block.reshape(block.shape[:-2] + (-1,))
        out[..., rows, cols] = np.nanmedian(flat, axis=-1)
    return out


def _median_blur(plane, radius):
    """
    Exact float64 median of a 3x3 or 5x5 window through cv2.medianBlur.

    OpenCV filters the float32 copy. Rounding to float32 keeps the order, so
    its result names the window element holding the median, which is read
    back in float64. Windows where distinct float64 values round to that
    result are recomputed with np.median.
    """
    size = 2 * radius + 1
    height, width = plane.shape
    rough = cv2.medianBlur(np.ascontiguousarray(plane, dtype=np.float32), size)
    padded = np.pad(plane, radius, mode='edge')
    padded32 = padded.astype(np.float32)
    low = np.full(plane.shape, np.inf)
    high = np.full(plane.shape, -np.inf)
    for dy in range(size):
        for dx in range(size):
            values = padded[dy:dy + height, dx:dx + width]
            match = padded32[dy:dy + height, dx:dx + width] == rough
            np.minimum(low, values, out=low, where=match)
            np.maximum(high, values, out=high, where=match)
    ambiguous = low != high
    if ambiguous.any():
        windows = sliding_window_view(padded, (size, size))[ambiguous]
        low[ambiguous] = np.median(windows.reshape(len(windows), -1), axis=-1)
    return low


def _median_blur_stack(array, radius):
    planes = array.reshape((-1,) + array.shape[-2:])
    return np.stack([_median_blur(plane, radius) for plane in planes]).reshape(array.shape)


def spatial_median_array(array, radius):
    """(2r+1)^2 median over the last two axes, neighbourhoods clipped at borders"""
    if radius < 0:
        raise ArgumentError(f"Spatial median radius must be >= 0, got {radius}")
    array = np.asarray(array, dtype=np.float64)
    if radius == 0:
        return array.copy()
    if radius in BLUR_RADII and min(array.shape[-2:]) > 2 * radius:
        kernel = lambda band: _median_blur_stack(band, radius)
    else:
        size = (1,) * (array.ndim - 2) + (2 * radius + 1, 2 * radius + 1)
        kernel = lambda band: ndimage.median_filter(band, size=size, mode='nearest')
    out = map_row_bands(kernel, array, halo=radius)
    return _clipped_borders(array, radius, out)


def spatial_median(plane, radius):
    return ImagePlane(spatial_median_array(plane.data, radius))
