"""
Thread-level data parallelism for pixel kernels.

Work is only ever split over channels or disjoint row bands, and every output
element is written by exactly one task, so results do not depend on the
number of workers.
"""
import logging
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from django.conf import settings

from .exceptions import ArgumentError

logger = logging.getLogger(__name__)

_threads = None


def configure(threads):
    """Set the worker count; 0 selects one worker per CPU"""
    global _threads
    if threads is None:
        _threads = None
        return
    if threads < 0:
        raise ArgumentError(f"--threads must be >= 0, got {threads}")
    _threads = int(threads)
    logger.debug(f"Worker count set to {worker_count()}")


def worker_count():
    threads = _threads
    if threads is None:
        threads = settings.SEAFLOOR['THREADS']
    if threads == 0:
        threads = os.cpu_count() or 1
    return max(1, threads)


def map_ordered(func, items):
    """Apply ``func`` to every item, returning results in input order"""
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def row_bands(height, bands):
    """Split ``height`` rows into at most ``bands`` contiguous [start, stop) ranges"""
    bands = max(1, min(bands, height))
    edges = np.linspace(0, height, bands + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def map_row_bands(func, array, halo=0, min_rows=64):
    """
    Evaluate ``func`` over row bands of ``array`` (rows on axis -2).

    Each band is passed with ``halo`` extra rows on both sides (clipped to the
    array); the halo rows are cut from the result before the bands are joined.
    """
    height = array.shape[-2]
    bands = min(worker_count(), max(1, height // min_rows))
    if bands <= 1:
        return func(array)

    def run(band):
        start, stop = band
        lo = max(0, start - halo)
        hi = min(height, stop + halo)
        result = func(array[..., lo:hi, :])
        return result[..., start - lo:start - lo + (stop - start), :]

    parts = map_ordered(run, row_bands(height, bands))
    return np.concatenate(parts, axis=-2)
