"""
Window sizing for the temporal median.

With contamination rate c, each of n samples at a pixel is independently
non-seafloor with probability c. The median breaks once ceil(n/2) or more
samples are contaminated; p_half is the probability of that event.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import gammaln

from raster.exceptions import ArgumentError


@dataclass(frozen=True)
class WindowSpec:
    """Temporal window length, spatial median radius and downsample factor"""

    n: int = 7
    spatial_radius: int = 1
    downsample_factor: int = 8

    def __post_init__(self):
        if self.n < 1 or self.n % 2 == 0:
            raise ArgumentError(f"Window length must be a positive odd integer, got {self.n}")
        if self.spatial_radius < 0:
            raise ArgumentError(f"Spatial radius must be >= 0, got {self.spatial_radius}")
        if self.downsample_factor < 1:
            raise ArgumentError(f"Downsample factor must be >= 1, got {self.downsample_factor}")

    @property
    def half(self):
        return self.n // 2


@dataclass(frozen=True)
class ContaminationModel:
    """Per-pixel probability that a sample shows something other than seafloor"""

    c: float

    def __post_init__(self):
        if not 0.0 < self.c < 0.5:
            raise ArgumentError(
                f"Contamination rate must lie in (0, 0.5), got {self.c}: breakdown point exceeded"
            )


def _rate(c):
    return (c if isinstance(c, ContaminationModel) else ContaminationModel(float(c))).c


def breakdown_count(n):
    """Contaminated samples needed to break a median of n"""
    return -(-n // 2)


def p_half(c, n):
    """P(at least ceil(n/2) of n samples contaminated)"""
    if n < 1:
        raise ArgumentError(f"Window length must be >= 1, got {n}")
    # binom.sf evaluates the tail through the regularized incomplete beta function.
    return float(stats.binom.sf(breakdown_count(n) - 1, n, _rate(c)))


def log_p_half(c, n):
    """Natural log of p_half from a log-space binomial sum"""
    if n < 1:
        raise ArgumentError(f"Window length must be >= 1, got {n}")
    rate = _rate(c)
    k = np.arange(breakdown_count(n), n + 1)
    terms = (
        gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
        + k * math.log(rate) + (n - k) * math.log1p(-rate)
    )
    return float(np.logaddexp.reduce(terms))


def required_window(c, target):
    """Smallest odd n with p_half(c, n) <= target"""
    if not 0.0 < target < 1.0:
        raise ArgumentError(f"Target probability must lie in (0, 1), got {target}")
    rate = _rate(c)

    def passes(m):
        return p_half(rate, 2 * m + 1) <= target

    if passes(0):
        return 1
    # p_half is non-increasing over odd n for c < 0.5: double, then bisect.
    low, high = 0, 1
    while not passes(high):
        low, high = high, high * 2
    while high - low > 1:
        middle = (low + high) // 2
        if passes(middle):
            high = middle
        else:
            low = middle
    return 2 * high + 1


def sample_size_table(c, target, max_rows=40):
    """
    Rows of (n, p_half) for odd n up to the required window.

    Long tables are thinned evenly; the first and the required n are always
    kept.
    """
    required = required_window(c, target)
    windows = np.arange(1, required + 1, 2)
    if len(windows) > max_rows:
        keep = np.unique(np.linspace(0, len(windows) - 1, max_rows).round().astype(int))
        windows = windows[keep]
    return [(int(n), p_half(c, int(n))) for n in windows]
