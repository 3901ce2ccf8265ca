"""
Batch enhancement of a manifest of frames.

Outputs are written to a hidden staging directory next to ``out_dir`` and
only moved into place once every frame succeeded; a failed run commits
nothing.
"""
import logging
import os
import shutil
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from raster.exceptions import ArgumentError, ImageIOError
from raster.fields import save_field
from raster.files import load_frame, save_frame, save_mask
from raster.serializers import SCHEMA_VERSION, write_document

from .manifest import write_manifest
from .serializers import RunReportSerializer
from .stream import StreamState

logger = logging.getLogger(__name__)

REPORT_NAME = 'run_report.json'
MANIFEST_NAME = 'manifest.txt'


@dataclass
class RunReport:
    config: dict
    static_factor: bool = False
    window_sizes: list = field(default_factory=list)
    invalid_fraction: list = field(default_factory=list)
    ms_per_frame: list = field(default_factory=list)
    factor_mean: list = field(default_factory=list)
    elapsed: float = 0.0
    complete: bool = False

    schema = SCHEMA_VERSION

    @property
    def frames(self):
        return len(self.window_sizes)

    @property
    def frames_per_second(self):
        return self.frames / self.elapsed if self.elapsed > 0 else 0.0

    def record(self, emission, milliseconds):
        factor = emission.factor
        values = factor.stack()
        self.window_sizes.append(emission.window_size)
        self.invalid_fraction.append(factor.invalid_fraction)
        self.ms_per_frame.append(milliseconds)
        self.factor_mean.append([
            float(channel[valid].mean()) if valid.any() else 0.0
            for channel, valid in zip(values, factor.valid)
        ])

    def as_dict(self):
        return dict(RunReportSerializer(self).data)


def output_names(path):
    path = Path(path)
    return {
        'enhanced': f"{path.stem}_enhanced{path.suffix.lower()}",
        'coverage': f"{path.stem}_coverage.png",
        'factor': f"{path.stem}_factor.tif",
    }


def _check_manifest(paths):
    if not paths:
        raise ArgumentError("Manifest is empty")
    seen = {}
    for position, path in enumerate(paths):
        for name in output_names(path).values():
            if name in seen:
                raise ArgumentError(
                    f"Manifest entries {seen[name]} and {position} would both write {name}"
                )
            seen[name] = position


def _commit(staging, out_dir):
    if not out_dir.exists():
        os.replace(staging, out_dir)
        return
    if not out_dir.is_dir():
        raise ImageIOError(f"Output path {out_dir} exists and is not a directory", out_dir)
    for item in sorted(staging.iterdir()):
        os.replace(item, out_dir / item.name)
    staging.rmdir()


def run_batch(manifest, scatter, config, out_dir, dump_factors=False, depth=16, gamma=None):
    """
    Enhance every frame listed in ``manifest`` and write the results to ``out_dir``.

    Returns the RunReport that is also written as run_report.json.
    """
    paths = [Path(path) for path in manifest]
    _check_manifest(paths)
    out_dir = Path(out_dir)
    staging = out_dir.parent / f".{out_dir.name}.staging-{uuid.uuid4().hex[:8]}"
    try:
        staging.mkdir(parents=True)
    except OSError as exc:
        raise ImageIOError(f"Cannot create staging directory {staging}: {exc}", staging) from exc

    report = RunReport(config=config.as_dict(), static_factor=config.static_factor)
    state = StreamState(scatter, config)
    timings = {}
    started = time.perf_counter()

    def write(emissions):
        for emission in emissions:
            tick = time.perf_counter()
            names = output_names(paths[emission.position])
            save_frame(emission.frame, staging / names['enhanced'], depth=depth, clamp=True)
            save_mask(emission.factor.coverage, staging / names['coverage'])
            if dump_factors:
                save_field(emission.factor, staging / names['factor'], epsilon=config.epsilon)
            total = timings.pop(emission.position, 0.0) + (time.perf_counter() - tick) * 1000.0
            report.record(emission, total)
            logger.debug(
                f"Frame {emission.position}: window {emission.window_size}, "
                f"{report.invalid_fraction[-1]:.2%} invalid, {total:.1f} ms"
            )

    try:
        for position, path in enumerate(paths):
            tick = time.perf_counter()
            try:
                frame = load_frame(path, gamma=gamma, index=position, tag=str(path))
            except ImageIOError as exc:
                raise ImageIOError(f"Manifest entry {position} ({path}) could not be loaded: {exc}", path) from exc
            emissions = state.push(frame)
            timings[position] = (time.perf_counter() - tick) * 1000.0
            write(emissions)
        write(state.flush())
        write_manifest(
            [staging / output_names(path)['enhanced'] for path in paths], staging / MANIFEST_NAME, header='enhanced frames'
        )

        report.elapsed = time.perf_counter() - started
        report.complete = True
        write_document(staging / REPORT_NAME, report.as_dict())
        _commit(staging, out_dir)
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        logger.error(f"Batch aborted; nothing was written to {out_dir}")
        raise

    shrunk = sum(1 for size in report.window_sizes if size < config.window.n)
    if shrunk:
        logger.warning(f"{shrunk} of {report.frames} frames used a shrunk window")
    logger.info(
        f"Enhanced {report.frames} frames into {out_dir} "
        f"({report.frames_per_second:.2f} frames/s, mean invalid {np.mean(report.invalid_fraction):.2%})"
    )
    return report
