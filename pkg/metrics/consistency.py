"""
Registration-based consistency error.

Every frame is backward mapped into the mosaic; the mosaic colour of a pixel
is the plain mean of its samples. On pixels seen by at least two frames, the
mean absolute deviation of the samples from the mosaic colour is averaged and
divided by the standard deviation of the mosaic colour over that overlap, so
the score is unaffected by a global offset or scale applied to every frame.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from raster.exceptions import ArgumentError, MetricError
from raster.parallel import map_ordered
from raster.serializers import SCHEMA_VERSION

from .registration import backward_map, check_frames
from .serializers import ConsistencyReportSerializer

logger = logging.getLogger(__name__)

NORMS = ('mae', 'rmse')


@dataclass
class RegionReport:
    errors: list
    overlap_pixel_count: int


@dataclass
class ConsistencyReport:
    errors: list
    overlap_pixel_count: int
    mosaic_shape: tuple
    per_frame: list
    norm: str = 'mae'
    regions: dict = field(default_factory=dict)
    truth_rmse: Optional[list] = None

    schema = SCHEMA_VERSION

    def as_dict(self):
        return dict(ConsistencyReportSerializer(self).data)


def _normalize(numerator, denominator):
    errors = []
    for num, den in zip(numerator, denominator):
        if num == 0:
            errors.append(0.0)
        elif den == 0:
            raise MetricError("Mosaic colour is constant over the overlap; the error cannot be normalized")
        else:
            errors.append(float(num / den))
    return errors


def _aggregate(deviation, mosaic, pixels, norm):
    """Per-channel (numerator, denominator) over the mosaic pixels in ``pixels``"""
    per_pixel = deviation[:, pixels]
    numerator = per_pixel.mean(axis=1)
    if norm == 'rmse':
        numerator = np.sqrt(numerator)
    return numerator, mosaic[:, pixels].std(axis=1)


def consistency_error(frames, registration, region_mask=None, norm='mae'):
    """
    Normalized consistency error per channel, with a per-frame breakdown
    and optional inside/outside reports for a mosaic-space ``region_mask``.
    """
    if norm not in NORMS:
        raise ArgumentError(f"Unknown norm '{norm}' (expected one of {', '.join(NORMS)})")
    frames = check_frames(frames, registration, minimum=2)
    shape = registration.mosaic_shape
    if region_mask is not None:
        region_mask = np.asarray(region_mask, dtype=bool)
        if region_mask.shape != shape:
            raise ArgumentError(f"Region mask is {region_mask.shape}, mosaic is {shape}")

    warps = map_ordered(
        lambda item: backward_map(item[0].stack(), item[1], shape),
        zip(frames, registration.homographies),
    )

    channels = frames[0].channels
    total = np.zeros((channels,) + shape)
    count = np.zeros(shape, dtype=np.int64)
    # Fixed frame order keeps the sums independent of the worker count.
    for warp in warps:
        total[:, warp.rows, warp.cols] += np.where(warp.valid, warp.samples, 0.0)
        count[warp.rows, warp.cols] += warp.valid
    overlap = count >= 2
    if not overlap.any():
        raise MetricError("Frames do not overlap in the mosaic")
    mosaic = np.divide(total, count, out=np.zeros_like(total), where=count > 0)

    deviation = np.zeros_like(total)
    frame_deviation = []
    for warp in warps:
        difference = warp.samples - mosaic[:, warp.rows, warp.cols]
        difference = difference ** 2 if norm == 'rmse' else np.abs(difference)
        difference = np.where(warp.valid, difference, 0.0)
        deviation[:, warp.rows, warp.cols] += difference
        shared = warp.valid & overlap[warp.rows, warp.cols]
        frame_deviation.append(difference[:, shared].mean(axis=1) if shared.any() else None)
    deviation = np.divide(deviation, count, out=np.zeros_like(deviation), where=count > 0)

    numerator, denominator = _aggregate(deviation, mosaic, overlap, norm)
    errors = _normalize(numerator, denominator)

    per_frame = []
    for values in frame_deviation:
        if values is None:
            per_frame.append(None)
            continue
        if norm == 'rmse':
            values = np.sqrt(values)
        per_frame.append(_normalize(values, denominator))

    regions = {}
    if region_mask is not None:
        for name, pixels in (('inside', overlap & region_mask), ('outside', overlap & ~region_mask)):
            if not pixels.any():
                regions[name] = None
                continue
            regions[name] = RegionReport(_normalize(*_aggregate(deviation, mosaic, pixels, norm)), int(pixels.sum()))

    overlap_count = int(overlap.sum())
    logger.info(f"Consistency over {overlap_count} overlap pixels ({norm}): {', '.join(f'{e:.4f}' for e in errors)}")
    return ConsistencyReport(errors, overlap_count, shape, per_frame, norm, regions)
