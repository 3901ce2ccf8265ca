"""
Sliding-window streaming enhancement.

Frames are pushed in temporal order into a ring buffer holding the last
n frames together with their reduced (spatial median + downsample) planes,
so every frame is preprocessed exactly once. Output frame t uses the window
[t - n//2, t + n//2], shrunk at the stream ends.
"""
import logging
from collections import deque
from dataclasses import dataclass

import numpy as np

from estimation.factor import allseafloor_from_reduced, compute_factor
from estimation.normalize import enhance
from estimation.scatter import reduce_field, reduce_frame
from raster.exceptions import StreamError

logger = logging.getLogger(__name__)


def window_bounds(position, half, last, min_window):
    """
    Inclusive [first, last] window for ``position`` when frames 0..last exist.

    Windows shorter than ``min_window`` grow to the nearest ``min_window``
    frames available.
    """
    first, final = max(0, position - half), min(last, position + half)
    if final - first + 1 < min_window:
        first = max(0, min(position - (min_window - 1) // 2, last + 1 - min_window))
        final = min(last, first + min_window - 1)
    return first, final


@dataclass
class Buffered:
    position: int
    frame: object
    reduced: np.ndarray


@dataclass
class Emission:
    """One enhanced output frame with the factor and window that produced it"""

    frame: object
    factor: object
    position: int
    window: tuple

    @property
    def window_size(self):
        return self.window[1] - self.window[0] + 1


class StreamState:
    """
    Ring buffer plus the fields needed to enhance a homogeneous frame stream.

    Not reentrant: push/flush must be called from one thread in order.
    """

    def __init__(self, scatter, config):
        self.scatter = scatter
        self.config = config
        self.half = config.window.n // 2
        self.span = max(config.window.n, config.min_window)
        # Frames that must follow a position before its window is complete.
        self.delay = max(self.half, (config.min_window - 1) // 2)
        self.ring = deque(maxlen=self.span)
        self.received = 0
        self.emitted_count = 0
        self._scatter_low = None
        self._static = None
        self._flushed = False

    @property
    def scatter_low(self):
        if self._scatter_low is None:
            self._scatter_low = reduce_field(self.scatter, self.config.window)
        return self._scatter_low

    def replace_scatter(self, scatter):
        """Swap the additive field mid-stream; the static factor is recomputed"""
        if self.ring and (scatter.size != self.ring[0].frame.size or scatter.channels != self.ring[0].frame.channels):
            raise StreamError("Replacement scatter field does not match the stream layout")
        self.scatter = scatter
        self._scatter_low = None
        self._static = None
        logger.info(f"Scatter field replaced after {self.received} frames")

    def _check(self, frame):
        if self._flushed:
            raise StreamError("Cannot push frames after flush")
        reference = self.ring[0].frame if self.ring else None
        if reference is not None and not frame.same_layout(reference):
            raise StreamError(
                f"Frame {self.received} is {frame.channels}x{frame.width}x{frame.height}, stream is "
                f"{reference.channels}x{reference.width}x{reference.height}"
            )
        if frame.size != self.scatter.size or frame.channels != self.scatter.channels:
            raise StreamError(
                f"Frame {self.received} ({frame.channels}x{frame.width}x{frame.height}) does not match the "
                f"scatter field ({self.scatter.channels}x{self.scatter.width}x{self.scatter.height})"
            )

    def push(self, frame):
        """
        Buffer ``frame``; return the emissions that became possible (possibly none).
        """
        self._check(frame)
        self.ring.append(Buffered(self.received, frame, reduce_frame(frame, self.config.window)))
        self.received += 1

        emissions = []
        if self.received >= self.span:
            last = self.received - 1
            while self.emitted_count + self.delay <= last:
                emissions.append(self._emit(self.emitted_count, last))
        return emissions

    def flush(self):
        """Emit every remaining frame using windows shrunk to the stream end"""
        if self.received < self.config.min_window:
            raise StreamError(
                f"Stream has {self.received} frames; at least {self.config.min_window} are required"
            )
        self._flushed = True
        last = self.received - 1
        return [self._emit(position, last) for position in range(self.emitted_count, self.received)]

    def _entries(self, first, final):
        start = self.ring[0].position
        if first < start:
            raise StreamError(f"Frame {first} has already left the ring buffer")
        return [self.ring[position - start] for position in range(first, final + 1)]

    def _factor(self, entries):
        allseafloor = allseafloor_from_reduced(
            [entry.reduced for entry in entries],
            entries[0].frame.size,
            self.config.estimator,
            self.config.min_window,
        )
        return compute_factor(allseafloor, self.scatter_low, self.config.reference, self.config.epsilon)

    def _emit(self, position, last):
        first, final = window_bounds(position, self.half, last, self.config.min_window)
        if self.config.static_factor:
            if self._static is None:
                start = self.ring[0].position
                self._static = self._factor(self._entries(start, min(last, start + self.span - 1)))
            factor = self._static
        else:
            factor = self._factor(self._entries(first, final))

        target = self._entries(position, position)[0].frame
        enhanced = enhance(target, self.scatter, factor, self.config)
        self.emitted_count += 1
        size = final - first + 1
        if size < self.config.window.n:
            logger.debug(f"Frame {position} used a shrunk window [{first}, {final}] ({size} frames)")
        else:
            logger.debug(f"Frame {position} used window [{first}, {final}]")
        return Emission(enhanced, factor, position, (first, final))


def reference_enhance(frames, scatter, config):
    """
    Non-streaming equivalent of StreamState: materializes every window and
    recomputes its reduced planes from scratch.
    """
    frames = list(frames)
    total = len(frames)
    if total < config.min_window:
        raise StreamError(f"Stream has {total} frames; at least {config.min_window} are required")
    spec = config.window
    scatter_low = reduce_field(scatter, spec)
    span = max(spec.n, config.min_window)

    def factor_for(window):
        allseafloor = allseafloor_from_reduced(
            [reduce_frame(frame, spec) for frame in window],
            window[0].size,
            config.estimator,
            config.min_window,
        )
        return compute_factor(allseafloor, scatter_low, config.reference, config.epsilon)

    static = factor_for(frames[:min(total, span)]) if config.static_factor else None
    emissions = []
    for position, frame in enumerate(frames):
        first, final = window_bounds(position, spec.n // 2, total - 1, config.min_window)
        factor = static if static is not None else factor_for(frames[first:final + 1])
        emissions.append(Emission(enhance(frame, scatter, factor, config), factor, position, (first, final)))
    return emissions
