"""
Two-band mosaic compositing for visual inspection.

The low band (Gaussian blur at 1/16 of the frame width) is averaged with a
rectangular weight falling from 1 at the frame centre to 0 at its border;
the high band is taken from the frame with the largest weight at each
mosaic pixel.
"""
import logging

import numpy as np
from scipy import ndimage

from raster.exceptions import ArgumentError
from raster.parallel import map_ordered
from raster.planes import Frame

from .registration import backward_map, check_frames

logger = logging.getLogger(__name__)

BLUR_FRACTION = 1 / 16


def split_bands(values, sigma):
    low = np.stack([ndimage.gaussian_filter(channel, sigma, mode='nearest') for channel in values])
    return low, values - low


def rectangular_weight(x, y, width, height):
    u = (x + 0.5) / width
    v = (y + 0.5) / height
    return np.clip((1.0 - np.abs(2.0 * u - 1.0)) * (1.0 - np.abs(2.0 * v - 1.0)), 0.0, None)


def _warp_bands(frame, matrix, shape):
    values = frame.stack()
    low, high = split_bands(values, frame.width * BLUR_FRACTION)
    low_warp = backward_map(low, matrix, shape)
    high_warp = backward_map(high, matrix, shape)
    weight = np.where(low_warp.valid, rectangular_weight(low_warp.x, low_warp.y, frame.width, frame.height), 0.0)
    return low_warp, high_warp.samples, weight


def composite(frames, registration):
    """Blend registered frames into one mosaic Frame; uncovered pixels are 0"""
    frames = list(frames)
    if not frames:
        raise ArgumentError("Nothing to composite: the frame list is empty")
    frames = check_frames(frames, registration)
    shape = registration.mosaic_shape
    channels = frames[0].channels

    bands = map_ordered(
        lambda item: _warp_bands(item[0], item[1], shape),
        zip(frames, registration.homographies),
    )
    low = np.zeros((channels,) + shape)
    weights = np.zeros(shape)
    best = np.zeros(shape)
    high = np.zeros((channels,) + shape)
    covered = np.zeros(shape, dtype=bool)
    for low_warp, high_samples, weight in bands:
        window = (low_warp.rows, low_warp.cols)
        low[(slice(None),) + window] += weight * low_warp.samples
        weights[window] += weight
        covered[window] |= low_warp.valid
        stronger = low_warp.valid & (weight > best[window])
        best[window] = np.where(stronger, weight, best[window])
        high[(slice(None),) + window] = np.where(stronger, high_samples, high[(slice(None),) + window])

    blended = np.divide(low, weights, out=np.zeros_like(low), where=weights > 0) + high
    blended = np.where(covered & (weights > 0), np.maximum(blended, 0.0), 0.0)
    logger.info(f"Composited {len(frames)} frames, {covered.mean():.1%} of the mosaic covered")
    return Frame.from_array(blended)
