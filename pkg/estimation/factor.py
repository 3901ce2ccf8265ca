"""
Multiplicative term: all-seafloor images and the factor field F.

The all-seafloor image of a window is A_ref * F + I_s at reduced resolution;
solving it per pixel for F and upsampling gives the factor used to
normalize the window's centre frame.
"""
import logging
from dataclasses import dataclass

import numpy as np

from raster.exceptions import ArgumentError
from raster.parallel import map_ordered
from raster.planes import FactorField, Frame, PlaneSet
from raster.resample import upsample_array
from robust_stats.medians import temporal_median_array

from .config import ESTIMATORS
from .scatter import check_layout, reduce_frame

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AllSeafloorImage(PlaneSet):
    """Reduced-resolution all-seafloor estimate plus the full frame size"""

    planes: tuple
    target_width: int
    target_height: int

    def __post_init__(self):
        self._check_planes()
        if self.target_width < self.width or self.target_height < self.height:
            raise ArgumentError("All-seafloor target size is smaller than its planes")

    @classmethod
    def from_array(cls, array, target_width, target_height):
        return cls(Frame.from_array(array).planes, target_width, target_height)


def allseafloor_from_reduced(reduced, target_size, estimator='median', min_window=3):
    """Temporal estimate over already reduced (channels, h, w) arrays of one window"""
    if len(reduced) < min_window:
        raise ArgumentError(f"All-seafloor window needs at least {min_window} frames, got {len(reduced)}")
    if estimator not in ESTIMATORS:
        raise ArgumentError(f"Unknown all-seafloor estimator '{estimator}'")
    stack = np.stack(reduced)
    if estimator == 'median':
        combined = temporal_median_array(stack)
    else:
        combined = stack.mean(axis=0)
    return AllSeafloorImage.from_array(combined, *target_size)


def estimate_allseafloor(window_frames, spec, estimator='median', min_window=3):
    """
    Spatial median, downsample, then temporal median over the window.
    """
    frames = list(window_frames)
    if len(frames) < min_window:
        raise ArgumentError(f"All-seafloor window needs at least {min_window} frames, got {len(frames)}")
    check_layout(frames)
    reduced = map_ordered(lambda frame: reduce_frame(frame, spec), frames)
    return allseafloor_from_reduced(reduced, frames[0].size, estimator, min_window)


def compute_factor(allseafloor, scatter, reference, epsilon=1e-4):
    """
    F = max(allseafloor - scatter, 0) / A_ref, upsampled to full resolution.

    ``scatter`` must already be at the all-seafloor resolution (see
    estimation.scatter.reduce_field). Pixels with F * A_ref below ``epsilon``
    are flagged invalid.
    """
    if scatter.size != allseafloor.size or scatter.channels != allseafloor.channels:
        raise ArgumentError(
            f"Scatter {scatter.channels}x{scatter.width}x{scatter.height} does not match the "
            f"all-seafloor image {allseafloor.channels}x{allseafloor.width}x{allseafloor.height}"
        )
    ref = reference.for_channels(allseafloor.channels)
    low = np.maximum(allseafloor.stack() - scatter.stack(), 0.0) / ref

    width, height = allseafloor.target_width, allseafloor.target_height
    full = np.stack(map_ordered(lambda channel: upsample_array(channel, width, height), low))
    valid = full * ref >= epsilon
    factor = FactorField(Frame.from_array(full).planes, valid)
    if factor.invalid_fraction > 0.05:
        logger.warning(f"{factor.invalid_fraction:.1%} of factor pixels are below the division floor")
    return factor
