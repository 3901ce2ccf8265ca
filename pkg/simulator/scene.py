"""
Scene description for the forward model.

Conventions: world X east, Y north, Z up, seafloor at Z = 0. The camera sits
at (x, y, altitude) and looks straight down at zero pitch and roll. Camera
axes are x right, y down (image rows), z forward. Lights are fixed in the
camera frame.
"""
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import ndimage

from raster.exceptions import ArgumentError


def _channels(values, name, minimum=0.0, strict=False):
    values = tuple(float(v) for v in np.atleast_1d(values))
    if len(values) not in (1, 3):
        raise ArgumentError(f"{name} needs 1 or 3 channels, got {len(values)}")
    if any((v <= minimum) if strict else (v < minimum) for v in values):
        bound = '>' if strict else '>='
        raise ArgumentError(f"{name} must be {bound} {minimum} per channel, got {values}")
    return values


def _unit(vector, name):
    vector = np.asarray(vector, dtype=np.float64).reshape(3)
    norm = np.linalg.norm(vector)
    if not np.isfinite(norm) or norm == 0:
        raise ArgumentError(f"{name} must be a non-zero 3-vector")
    return vector / norm


@dataclass(frozen=True)
class Camera:
    """Pinhole intrinsics in pixels; the principal point defaults to the image centre"""

    width: int
    height: int
    focal_length: float
    cx: Optional[float] = None
    cy: Optional[float] = None

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ArgumentError(f"Camera size must be positive, got {self.width}x{self.height}")
        if not self.focal_length > 0:
            raise ArgumentError(f"Focal length must be > 0, got {self.focal_length}")
        if self.cx is None:
            object.__setattr__(self, 'cx', self.width / 2)
        if self.cy is None:
            object.__setattr__(self, 'cy', self.height / 2)

    def rays(self):
        """Unit viewing directions (height * width, 3) through pixel centres, camera frame"""
        rows, cols = np.mgrid[0:self.height, 0:self.width]
        directions = np.stack([
            (cols.ravel() + 0.5 - self.cx) / self.focal_length,
            (rows.ravel() + 0.5 - self.cy) / self.focal_length,
            np.ones(self.height * self.width),
        ], axis=1)
        return directions / np.linalg.norm(directions, axis=1, keepdims=True)


@dataclass(frozen=True)
class Pose:
    altitude: float
    pitch: float = 0.0
    roll: float = 0.0
    x: float = 0.0
    y: float = 0.0

    def __post_init__(self):
        if not self.altitude > 0:
            raise ArgumentError(f"Altitude must be > 0, got {self.altitude}")
        if abs(self.pitch) >= np.pi / 2 or abs(self.roll) >= np.pi / 2:
            raise ArgumentError("Pitch and roll must lie in (-pi/2, pi/2)")

    @property
    def orientation(self):
        """Everything the camera-relative geometry depends on"""
        return self.altitude, self.pitch, self.roll

    def rotation(self):
        """Camera-to-world rotation"""
        base = np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]])
        cp, sp = np.cos(self.pitch), np.sin(self.pitch)
        cr, sr = np.cos(self.roll), np.sin(self.roll)
        pitch = np.array([[1.0, 0.0, 0.0], [0.0, cp, -sp], [0.0, sp, cp]])
        roll = np.array([[cr, 0.0, sr], [0.0, 1.0, 0.0], [-sr, 0.0, cr]])
        return base @ pitch @ roll

    def seafloor_normal(self):
        """World up expressed in the camera frame"""
        return self.rotation().T @ np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True, eq=False)
class LightSource:
    """Point light with a Gaussian angular fall-off around its axis"""

    position: np.ndarray
    direction: np.ndarray
    intensity: tuple
    cone_sigma: float

    def __post_init__(self):
        object.__setattr__(self, 'position', np.asarray(self.position, dtype=np.float64).reshape(3))
        object.__setattr__(self, 'direction', _unit(self.direction, 'Light direction'))
        object.__setattr__(self, 'intensity', _channels(self.intensity, 'Light intensity'))
        if not self.cone_sigma > 0:
            raise ArgumentError(f"cone_sigma must be > 0, got {self.cone_sigma}")


@dataclass(frozen=True)
class WaterProperties:
    """Per-channel attenuation and scattering plus the phase-function asymmetry"""

    eta: tuple = (0.65, 0.35, 0.30)
    beta_scale: tuple = (0.3, 0.3, 0.3)
    hg_g: float = 0.8
    steps: int = 64
    max_distance: float = 20.0

    def __post_init__(self):
        object.__setattr__(self, 'eta', _channels(self.eta, 'eta', strict=True))
        object.__setattr__(self, 'beta_scale', _channels(self.beta_scale, 'beta_scale'))
        if not -1.0 < self.hg_g < 1.0:
            raise ArgumentError(f"hg_g must lie in (-1, 1), got {self.hg_g}")
        if self.steps < 1:
            raise ArgumentError(f"Quadrature step count must be positive, got {self.steps}")
        if not self.max_distance > 0:
            raise ArgumentError(f"max_distance must be > 0, got {self.max_distance}")


@dataclass(frozen=True, eq=False)
class AlbedoMap:
    """
    Seafloor reflectance on a regular grid.

    ``values`` is (channels, rows, cols); texel (row, col) is centred at
    origin + ((col + 0.5) * texel_size, (row + 0.5) * texel_size).
    """

    values: np.ndarray
    texel_size: float
    origin: tuple = (0.0, 0.0)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim == 2:
            values = values[np.newaxis]
        if values.ndim != 3 or values.shape[0] not in (1, 3):
            raise ArgumentError(f"Albedo map must be (channels, rows, cols), got {values.shape}")
        if not np.isfinite(values).all() or values.min() < 0 or values.max() > 1:
            raise ArgumentError("Albedo values must lie in [0, 1]")
        if not self.texel_size > 0:
            raise ArgumentError(f"texel_size must be > 0, got {self.texel_size}")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'origin', tuple(float(v) for v in self.origin))

    @classmethod
    def generate(cls, size, texel_size, base=(0.5, 0.5, 0.5), texture=0.1, smoothing=4.0, seed=0, origin=None):
        """Base colour modulated by smoothed random texture over ``size`` = (width, height) meters"""
        base = np.asarray(_channels(base, 'Albedo base'))
        cols = max(2, int(np.ceil(size[0] / texel_size)))
        rows = max(2, int(np.ceil(size[1] / texel_size)))
        noise = np.random.default_rng(seed).standard_normal((rows, cols))
        if smoothing > 0:
            noise = ndimage.gaussian_filter(noise, smoothing, mode='wrap')
        spread = noise.std()
        if spread > 0:
            noise = noise / spread
        values = np.clip(base[:, np.newaxis, np.newaxis] * (1.0 + texture * noise), 0.0, 1.0)
        if origin is None:
            origin = (-cols * texel_size / 2, -rows * texel_size / 2)
        return cls(values, texel_size, origin)

    @classmethod
    def uniform(cls, size, texel_size, value, origin=None):
        return cls.generate(size, texel_size, base=value, texture=0.0, smoothing=0.0, origin=origin)

    @classmethod
    def from_frame(cls, frame, texel_size, origin=(0.0, 0.0)):
        """Use an image as the map; image row 0 is the northern edge"""
        return cls(frame.stack()[:, ::-1, :], texel_size, origin)

    @property
    def channels(self):
        return self.values.shape[0]

    def extent(self):
        """(xmin, xmax, ymin, ymax) in meters"""
        rows, cols = self.values.shape[1:]
        x0, y0 = self.origin
        return x0, x0 + cols * self.texel_size, y0, y0 + rows * self.texel_size

    def covers(self, x, y):
        xmin, xmax, ymin, ymax = self.extent()
        return (x >= xmin) & (x <= xmax) & (y >= ymin) & (y <= ymax)

    def sample(self, x, y):
        """Bilinear lookup at seafloor coordinates; returns (channels,) + x.shape"""
        col = (np.asarray(x) - self.origin[0]) / self.texel_size - 0.5
        row = (np.asarray(y) - self.origin[1]) / self.texel_size - 0.5
        return np.stack([
            ndimage.map_coordinates(channel, [row, col], order=1, mode='nearest')
            for channel in self.values
        ])

    def scaled(self, factor):
        return replace(self, values=np.clip(self.values * factor, 0.0, 1.0))


@dataclass(frozen=True)
class ContaminationSpec:
    """
    Transient objects stamped per frame: ellipses with semi-axes in
    ``size`` (meters), bright or dark, until ``rate`` of the footprint is covered.
    """

    rate: float = 0.0
    size: tuple = (0.05, 0.3)
    bright: tuple = (0.8, 1.0)
    dark: tuple = (0.0, 0.1)
    bright_fraction: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.rate < 0.5:
            raise ArgumentError(f"Contamination rate must lie in [0, 0.5), got {self.rate}")
        for name in ('size', 'bright', 'dark'):
            low, high = getattr(self, name)
            if low > high or low < 0:
                raise ArgumentError(f"Contamination {name} range is invalid: {(low, high)}")
        if self.size[0] <= 0:
            raise ArgumentError("Contamination objects need a positive size")
        if self.bright[1] > 1.0 or self.dark[1] > 1.0:
            raise ArgumentError("Contamination albedo must lie in [0, 1]")
        if not 0.0 <= self.bright_fraction <= 1.0:
            raise ArgumentError(f"bright_fraction must lie in [0, 1], got {self.bright_fraction}")


@dataclass(frozen=True)
class WaterColumnSpec:
    """High-altitude frames that only show backscatter and floating particles"""

    count: int = 7
    particle_rate: float = 0.05
    particle_radius: tuple = (1.0, 4.0)

    def __post_init__(self):
        if self.count < 1:
            raise ArgumentError(f"Water-column frame count must be positive, got {self.count}")
        if not 0.0 <= self.particle_rate < 0.5:
            raise ArgumentError(f"particle_rate must lie in [0, 0.5), got {self.particle_rate}")
        if not 0 < self.particle_radius[0] <= self.particle_radius[1]:
            raise ArgumentError(f"particle_radius range is invalid: {self.particle_radius}")


@dataclass(frozen=True, eq=False)
class SceneSpec:
    camera: Camera
    pose: Pose
    lights: tuple
    water: WaterProperties
    albedo: AlbedoMap
    contamination: ContaminationSpec = field(default_factory=ContaminationSpec)
    seed: int = 0
    cosine_weighting: bool = True
    water_column: Optional[WaterColumnSpec] = None

    def __post_init__(self):
        lights = tuple(self.lights)
        if not lights:
            raise ArgumentError("A scene needs at least one light")
        object.__setattr__(self, 'lights', lights)
        channels = {len(light.intensity) for light in lights}
        channels |= {len(self.water.eta), len(self.water.beta_scale), self.albedo.channels}
        channels.discard(1)
        if len(channels) > 1:
            raise ArgumentError(f"Scene mixes channel counts {sorted(channels)}")

    @property
    def channels(self):
        counts = [len(light.intensity) for light in self.lights]
        counts += [len(self.water.eta), len(self.water.beta_scale), self.albedo.channels]
        return max(counts)

    def per_channel(self, values):
        """Broadcast a 1- or 3-tuple to a (channels,) array"""
        values = np.asarray(values, dtype=np.float64)
        return np.broadcast_to(values, (self.channels,)).copy() if values.size == 1 else values

    def with_albedo(self, albedo):
        return replace(self, albedo=albedo)
