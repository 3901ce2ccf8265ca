"""
Frame-to-mosaic registration and backward mapping.

A Registration holds one 3x3 homography per frame mapping frame pixel
coordinates (column, row; pixel centres at integers) to mosaic pixel
coordinates, plus the mosaic shape. Frames are sampled into the mosaic by
inverting those homographies.
"""
import logging
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np
from scipy import ndimage

from raster.exceptions import ArgumentError
from raster.files import load_correspondence
from raster.resample import downsample_array
from raster.serializers import SCHEMA_VERSION, load_document, write_document

from .serializers import RegistrationSerializer

logger = logging.getLogger(__name__)

MAX_MOSAIC_PIXELS = 64_000_000
FIT_POINTS = 4096


@dataclass(frozen=True, eq=False)
class Registration:
    homographies: tuple
    mosaic_shape: tuple

    def __post_init__(self):
        homographies = []
        for position, matrix in enumerate(self.homographies):
            matrix = np.array(matrix, dtype=np.float64).reshape(3, 3)
            if not np.isfinite(matrix).all() or abs(np.linalg.det(matrix)) < 1e-12:
                raise ArgumentError(f"Homography {position} is singular or not finite")
            matrix.setflags(write=False)
            homographies.append(matrix)
        height, width = (int(v) for v in self.mosaic_shape)
        if height < 1 or width < 1:
            raise ArgumentError(f"Mosaic shape must be positive, got {self.mosaic_shape}")
        if height * width > MAX_MOSAIC_PIXELS:
            raise ArgumentError(f"Mosaic of {width}x{height} pixels is too large")
        object.__setattr__(self, 'homographies', tuple(homographies))
        object.__setattr__(self, 'mosaic_shape', (height, width))

    def __len__(self):
        return len(self.homographies)

    @classmethod
    def identity(cls, count, shape):
        return cls(tuple(np.eye(3) for _ in range(count)), shape)

    @classmethod
    def from_correspondence(cls, maps, cell_size=None):
        """
        Fit a homography per frame from dense seafloor-coordinate maps
        (2, height, width) in meters, NaN where a pixel has no seafloor.

        Mosaic pixel (u, v) covers seafloor ((xmin + u * cell), (ymax - v * cell)),
        so north is up. ``cell_size`` defaults to the median ground sample distance.
        """
        maps = [np.asarray(m, dtype=np.float64) for m in maps]
        if not maps:
            raise ArgumentError("Registration needs at least one correspondence map")
        valid = [np.isfinite(m).all(axis=0) for m in maps]
        if not all(v.any() for v in valid):
            raise ArgumentError("A correspondence map has no seafloor pixels")

        xs = np.concatenate([m[0][v] for m, v in zip(maps, valid)])
        ys = np.concatenate([m[1][v] for m, v in zip(maps, valid)])
        if cell_size is None:
            cell_size = float(np.median([ground_sample_distance(m) for m in maps]))
        if not cell_size > 0:
            raise ArgumentError(f"Mosaic cell size must be > 0, got {cell_size}")
        xmin, ymax = xs.min(), ys.max()
        shape = (_cells(ymax - ys.min(), cell_size), _cells(xs.max() - xmin, cell_size))

        homographies = []
        for position, (coordinates, mask) in enumerate(zip(maps, valid)):
            rows, cols = np.nonzero(mask)
            stride = max(1, len(rows) // FIT_POINTS)
            rows, cols = rows[::stride], cols[::stride]
            if len(rows) < 4:
                raise ArgumentError(f"Correspondence map {position} has fewer than 4 seafloor pixels")
            source = np.stack([cols, rows], axis=1).astype(np.float64)
            target = np.stack([
                (coordinates[0][rows, cols] - xmin) / cell_size,
                (ymax - coordinates[1][rows, cols]) / cell_size,
            ], axis=1)
            matrix, _ = cv2.findHomography(source, target, 0)
            if matrix is None:
                raise ArgumentError(f"Could not fit a homography to correspondence map {position}")
            homographies.append(matrix)
        logger.info(f"Fitted {len(homographies)} homographies onto a {shape[1]}x{shape[0]} mosaic (cell {cell_size:.4g} m)")
        return cls(tuple(homographies), shape)

    def as_document(self):
        return {
            'schema': SCHEMA_VERSION,
            'homographies': [matrix.ravel().tolist() for matrix in self.homographies],
            'mosaic_shape': list(self.mosaic_shape),
        }


def _cells(span, cell_size):
    # Pixel centres from 0 to span inclusive; tolerate rounding in span / cell_size.
    return int(np.ceil(span / cell_size - 1e-6)) + 1


def ground_sample_distance(coordinates):
    """Median seafloor distance between horizontally adjacent pixels"""
    step = np.hypot(np.diff(coordinates[0], axis=1), np.diff(coordinates[1], axis=1))
    step = step[np.isfinite(step)]
    if step.size == 0:
        raise ArgumentError("Correspondence map is too small to measure its ground sample distance")
    return float(np.median(step))


def load_registration(path, cell_size=None):
    """Read a registration document holding homographies or correspondence-map paths"""
    path = Path(path)
    data = load_document(path, RegistrationSerializer).validated_data
    if 'homographies' in data:
        return Registration(tuple(data['homographies']), tuple(data['mosaic_shape']))
    maps = []
    for entry in data['correspondence']:
        entry = Path(entry)
        maps.append(load_correspondence(entry if entry.is_absolute() else path.parent / entry))
    return Registration.from_correspondence(maps, cell_size or data.get('cell_size'))


def save_registration(registration, path):
    write_document(path, registration.as_document())


@dataclass(frozen=True, eq=False)
class Warp:
    """
    One frame resampled onto a window of the mosaic.

    ``rows``/``cols`` are the mosaic slices; ``x``/``y`` the frame
    coordinates of each mosaic pixel in that window.
    """

    rows: slice
    cols: slice
    samples: np.ndarray
    valid: np.ndarray
    x: np.ndarray
    y: np.ndarray

    def place(self, shape, fill=0.0):
        """Samples on a full mosaic canvas of ``shape`` (channels, height, width)"""
        canvas = np.full(shape, fill)
        canvas[:, self.rows, self.cols] = np.where(self.valid, self.samples, fill)
        return canvas


def footprint(matrix, width, height, mosaic_shape):
    """Mosaic slices bounding the projected frame corners"""
    corners = np.array([[-0.5, -0.5], [width - 0.5, -0.5], [width - 0.5, height - 0.5], [-0.5, height - 0.5]])
    projected = cv2.perspectiveTransform(corners.reshape(-1, 1, 2), matrix).reshape(-1, 2)
    rows, cols = mosaic_shape
    c0 = int(np.clip(np.floor(projected[:, 0].min()), 0, cols))
    c1 = int(np.clip(np.ceil(projected[:, 0].max()) + 1, 0, cols))
    r0 = int(np.clip(np.floor(projected[:, 1].min()), 0, rows))
    r1 = int(np.clip(np.ceil(projected[:, 1].max()) + 1, 0, rows))
    return slice(r0, r1), slice(c0, c1)


def pyramid_level(inverse, u, v, w):
    """
    Continuous pyramid level log2(scale) in [0, 1] from the Jacobian of
    the mosaic-to-frame mapping at each mosaic pixel.
    """
    x = (inverse[0, 0] * u + inverse[0, 1] * v + inverse[0, 2]) / w
    y = (inverse[1, 0] * u + inverse[1, 1] * v + inverse[1, 2]) / w
    dxdu = (inverse[0, 0] - x * inverse[2, 0]) / w
    dxdv = (inverse[0, 1] - x * inverse[2, 1]) / w
    dydu = (inverse[1, 0] - y * inverse[2, 0]) / w
    dydv = (inverse[1, 1] - y * inverse[2, 1]) / w
    scale = np.sqrt(np.abs(dxdu * dydv - dxdv * dydu))
    return np.clip(np.log2(np.maximum(scale, 1e-12)), 0.0, 1.0)


def backward_map(values, matrix, mosaic_shape):
    """
    Sample ``values`` (channels, height, width) at every mosaic pixel that
    falls inside the frame. Bilinear on a two-level pyramid, with the levels
    blended by the local minification.
    """
    channels, height, width = values.shape
    rows, cols = footprint(matrix, width, height, mosaic_shape)
    v, u = np.mgrid[rows, cols].astype(np.float64)
    if u.size == 0:
        return Warp(rows, cols, np.zeros((channels,) + u.shape), np.zeros(u.shape, dtype=bool), u, v)
    inverse = np.linalg.inv(matrix)
    w = inverse[2, 0] * u + inverse[2, 1] * v + inverse[2, 2]
    ahead = w > 1e-12
    w = np.where(ahead, w, 1.0)
    x = (inverse[0, 0] * u + inverse[0, 1] * v + inverse[0, 2]) / w
    y = (inverse[1, 0] * u + inverse[1, 1] * v + inverse[1, 2]) / w
    valid = ahead & (x >= 0) & (x <= width - 1) & (y >= 0) & (y <= height - 1)

    level = np.where(valid, pyramid_level(inverse, u, v, w), 0.0)
    samples = np.stack([
        ndimage.map_coordinates(channel, [y, x], order=1, mode='nearest') for channel in values
    ])
    if (level > 0).any():
        coarse = downsample_array(values, 2)
        x1, y1 = (x + 0.5) / 2 - 0.5, (y + 0.5) / 2 - 0.5
        coarse_samples = np.stack([
            ndimage.map_coordinates(channel, [y1, x1], order=1, mode='nearest') for channel in coarse
        ])
        samples = samples + level * (coarse_samples - samples)
    return Warp(rows, cols, samples, valid, x, y)


def check_frames(frames, registration, minimum=1):
    frames = list(frames)
    if len(frames) < minimum:
        raise ArgumentError(f"Expected at least {minimum} frames, got {len(frames)}")
    if len(frames) != len(registration):
        raise ArgumentError(f"Registration covers {len(registration)} frames, got {len(frames)}")
    first = frames[0]
    for frame in frames[1:]:
        if frame.channels != first.channels:
            raise ArgumentError("All frames must have the same number of channels")
    return frames

