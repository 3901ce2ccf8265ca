"""
Pixel containers: ImagePlane, Frame, ScatterField, FactorField.

All intensities are linear radiance normalised so that sensor full scale is
1.0. Containers are immutable: arrays are copied on construction and marked
read-only.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import ArgumentError, DataError


def _frozen(array, dtype=np.float64):
    data = np.array(array, dtype=dtype, copy=True)
    data.setflags(write=False)
    return data


@dataclass(frozen=True, eq=False)
class ImagePlane:
    """Single-channel raster of finite, non-negative intensities"""

    data: np.ndarray

    def __post_init__(self):
        data = _frozen(self.data)
        if data.ndim != 2 or data.size == 0:
            raise ArgumentError(f"ImagePlane needs a non-empty 2-D array, got shape {data.shape}")
        if not np.isfinite(data).all():
            raise DataError("ImagePlane values must be finite")
        if (data < 0).any():
            raise DataError("ImagePlane values must be non-negative")
        object.__setattr__(self, 'data', data)

    @classmethod
    def constant(cls, width, height, value):
        return cls(np.full((height, width), float(value)))

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def shape(self):
        return self.data.shape


class PlaneSet:
    """Shared accessors for containers holding one plane per channel"""

    planes: tuple

    def _check_planes(self):
        planes = tuple(
            plane if isinstance(plane, ImagePlane) else ImagePlane(plane)
            for plane in self.planes
        )
        if len(planes) not in (1, 3):
            raise ArgumentError(f"Expected 1 or 3 channels, got {len(planes)}")
        if len({plane.shape for plane in planes}) != 1:
            raise ArgumentError("All channel planes must share identical dimensions")
        object.__setattr__(self, 'planes', planes)

    @property
    def channels(self):
        return len(self.planes)

    @property
    def width(self):
        return self.planes[0].width

    @property
    def height(self):
        return self.planes[0].height

    @property
    def size(self):
        """(width, height) in pixels"""
        return self.width, self.height

    def stack(self):
        """Planes as a read-only (channels, height, width) array"""
        stacked = np.stack([plane.data for plane in self.planes])
        stacked.setflags(write=False)
        return stacked


@dataclass(frozen=True, eq=False)
class Frame(PlaneSet):
    """One observation: a plane per colour channel plus its sequence position"""

    planes: tuple
    index: int = 0
    tag: Optional[str] = None

    def __post_init__(self):
        self._check_planes()
        if self.index < 0:
            raise ArgumentError(f"Frame index must be >= 0, got {self.index}")

    @classmethod
    def from_array(cls, array, index=0, tag=None):
        """Build a frame from a (height, width) or (channels, height, width) array"""
        array = np.asarray(array, dtype=np.float64)
        if array.ndim == 2:
            array = array[np.newaxis]
        if array.ndim != 3:
            raise ArgumentError(f"Frame arrays must be 2-D or 3-D, got shape {array.shape}")
        return cls(tuple(ImagePlane(channel) for channel in array), index=index, tag=tag)

    def same_layout(self, other):
        return self.channels == other.channels and self.size == other.size


@dataclass(frozen=True, eq=False)
class ScatterField(PlaneSet):
    """Per-channel additive backscatter estimate"""

    planes: tuple

    def __post_init__(self):
        self._check_planes()

    @classmethod
    def from_array(cls, array):
        return cls(Frame.from_array(array).planes)


@dataclass(frozen=True, eq=False)
class FactorField(PlaneSet):
    """
    Per-channel multiplicative illumination/attenuation field.

    ``valid`` is a (channels, height, width) boolean array; pixels where the
    estimate fell below the division floor are False.
    """

    planes: tuple
    valid: np.ndarray = field(default=None, compare=False)

    def __post_init__(self):
        self._check_planes()
        if self.valid is None:
            valid = np.ones((self.channels, self.height, self.width), dtype=bool)
        else:
            valid = np.array(self.valid, dtype=bool, copy=True)
            if valid.ndim == 2:
                valid = np.broadcast_to(valid, (self.channels,) + valid.shape).copy()
            if valid.shape != (self.channels, self.height, self.width):
                raise ArgumentError(
                    f"Validity mask shape {valid.shape} does not match factor "
                    f"{(self.channels, self.height, self.width)}"
                )
        valid.setflags(write=False)
        object.__setattr__(self, 'valid', valid)

    @classmethod
    def from_array(cls, array, epsilon=None):
        """Build a factor field, flagging values below ``epsilon`` when given"""
        frame = Frame.from_array(array)
        valid = None
        if epsilon is not None:
            valid = frame.stack() >= epsilon
        return cls(frame.planes, valid)

    @property
    def coverage(self):
        """Pixels valid in every channel"""
        return self.valid.all(axis=0)

    @property
    def invalid_fraction(self):
        return float(1.0 - self.coverage.mean())
