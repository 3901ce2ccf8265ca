"""
Additive term: backscatter from water-column frames, and the shared
spatial-median + downsample preprocessing.
"""
import logging

import numpy as np

from raster.exceptions import ArgumentError
from raster.planes import ScatterField
from raster.resample import downsample_array
from robust_stats.medians import spatial_median_array, temporal_median_array

logger = logging.getLogger(__name__)

MIN_WATER_FRAMES = 3


def check_layout(frames):
    first = frames[0]
    for frame in frames[1:]:
        if not frame.same_layout(first):
            raise ArgumentError(
                f"Frame {frame.index} is {frame.channels}x{frame.width}x{frame.height}, "
                f"expected {first.channels}x{first.width}x{first.height}"
            )


def estimate_scatter(water_frames):
    """
    Per-pixel temporal median over b >= 3 frames showing only the water column.
    """
    frames = list(water_frames)
    if len(frames) < MIN_WATER_FRAMES:
        raise ArgumentError(
            f"Scatter estimation needs at least {MIN_WATER_FRAMES} water-column frames, got {len(frames)}"
        )
    check_layout(frames)
    stack = np.stack([frame.stack() for frame in frames])
    logger.info(f"Estimating scatter from {len(frames)} water-column frames")
    return ScatterField.from_array(temporal_median_array(stack))


def reduce_array(array, spec):
    """Spatial median followed by box downsampling, on (channels, h, w)"""
    return downsample_array(spatial_median_array(array, spec.spatial_radius), spec.downsample_factor)


def reduce_frame(frame, spec):
    reduced = reduce_array(frame.stack(), spec)
    reduced.setflags(write=False)
    return reduced


def reduce_field(field, spec):
    """Bring a full-resolution scatter field to all-seafloor resolution"""
    return ScatterField.from_array(reduce_array(field.stack(), spec))
