"""
Enhancement configuration: reference seafloor colour and numeric guards.
"""
from dataclasses import dataclass, field

import numpy as np

from raster.exceptions import ArgumentError
from robust_stats.sampling import WindowSpec

ESTIMATORS = ('median', 'mean')


@dataclass(frozen=True)
class ReferenceColor:
    """
    Assumed seafloor albedo per channel.

    Acts as the white-balance reference: restored images are correct up to
    one global scale per channel, fixed by this colour.
    """

    values: tuple = (0.5, 0.5, 0.5)

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if len(values) not in (1, 3):
            raise ArgumentError(f"Reference colour needs 1 or 3 channels, got {len(values)}")
        if any(not 0.0 < v <= 1.0 for v in values):
            raise ArgumentError(f"Reference colour channels must lie in (0, 1], got {values}")
        object.__setattr__(self, 'values', values)

    @classmethod
    def parse(cls, text):
        """Parse 'r,g,b' or a single grey value"""
        try:
            values = tuple(float(part) for part in str(text).split(','))
        except ValueError as exc:
            raise ArgumentError(f"Cannot parse reference colour '{text}'") from exc
        return cls(values)

    def for_channels(self, channels):
        """Reference values as a (channels, 1, 1) array"""
        values = self.values
        if len(values) == 1:
            values = values * channels
        elif channels == 1:
            if len(set(values)) != 1:
                raise ArgumentError(f"Colour reference {values} cannot be applied to single-channel frames")
            values = values[:1]
        return np.array(values, dtype=np.float64).reshape(channels, 1, 1)


@dataclass(frozen=True)
class EnhancementConfig:
    window: WindowSpec = field(default_factory=WindowSpec)
    reference: ReferenceColor = field(default_factory=ReferenceColor)
    epsilon: float = 1e-4
    clamp_output: bool = False
    static_factor: bool = False
    estimator: str = 'median'
    min_window: int = 3

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ArgumentError(f"Division floor epsilon must be > 0, got {self.epsilon}")
        if self.estimator not in ESTIMATORS:
            raise ArgumentError(f"Unknown all-seafloor estimator '{self.estimator}'")
        if self.min_window < 1:
            raise ArgumentError(f"Minimum window must be >= 1, got {self.min_window}")

    def as_dict(self):
        return {
            'window': self.window.n,
            'spatial_radius': self.window.spatial_radius,
            'downsample': self.window.downsample_factor,
            'reference': list(self.reference.values),
            'epsilon': self.epsilon,
            'clamp_output': self.clamp_output,
            'static_factor': self.static_factor,
            'estimator': self.estimator,
            'min_window': self.min_window,
        }
