"""
On-disk layout of a simulated run.

    frame_NNNN.png            observed frames (16-bit linear or 8-bit sRGB)
    gt/albedo_NNNN.tif        contaminated albedo
    gt/clean_albedo_NNNN.tif  albedo without transient objects
    gt/scatter_NNNN.tif       backscatter field (+ sidecar)
    gt/factor_NNNN.tif        multiplicative field (+ sidecar, mask)
    corr/corr_NNNN.tif        seafloor (x, y) per pixel, float32
    manifest.txt, truth_manifest.txt, registration.json
    water/water_NNNN.png, water_manifest.txt   (water-column scenes only)
"""
import logging
from pathlib import Path

from pipeline.manifest import write_manifest
from raster.fields import save_field
from raster.files import save_correspondence, save_frame
from raster.serializers import SCHEMA_VERSION, write_document

logger = logging.getLogger(__name__)

MANIFEST_NAME = 'manifest.txt'
TRUTH_MANIFEST_NAME = 'truth_manifest.txt'
WATER_MANIFEST_NAME = 'water_manifest.txt'
REGISTRATION_NAME = 'registration.json'


def frame_name(index):
    return f"frame_{index:04d}.png"


def clipped_fraction(frame, region=None):
    """Share of pixels (within ``region``) with any channel above full scale"""
    over = (frame.stack() > 1.0).any(axis=0)
    if region is not None:
        over = over[region]
    return float(over.mean()) if over.size else 0.0


def _warn_clipped(kind, fractions):
    saturated = [(fraction, index) for index, fraction in enumerate(fractions) if fraction > 0]
    if not saturated:
        return
    worst, index = max(saturated)
    logger.warning(
        f"{len(saturated)} of {len(fractions)} {kind} exceed full scale and were clipped on disk "
        f"(worst: {index}, {worst:.1%} of pixels); lower the light intensity or raise the altitude"
    )


def write_sequence(sequence, out_dir, water_frames=None, depth=16):
    """
    Write a RenderedSequence (and optional water-column frames) below
    ``out_dir``. Returns the path of the frame manifest.
    """
    out_dir = Path(out_dir)
    frames, truths, correspondence, clipped = [], [], [], []
    for index, (frame, truth) in enumerate(zip(sequence.frames, sequence.truths)):
        stem = f"{index:04d}"
        frames.append(out_dir / frame_name(index))
        clipped.append(clipped_fraction(frame, truth.seafloor_mask))
        save_frame(frame, frames[-1], depth=depth, clamp=True)

        truths.append(out_dir / 'gt' / f"albedo_{stem}.tif")
        save_frame(truth.albedo, truths[-1], depth=16)
        save_frame(truth.clean_albedo, out_dir / 'gt' / f"clean_albedo_{stem}.tif", depth=16)
        save_field(truth.scatter, out_dir / 'gt' / f"scatter_{stem}.tif")
        save_field(truth.factor, out_dir / 'gt' / f"factor_{stem}.tif")

        correspondence.append(out_dir / 'corr' / f"corr_{stem}.tif")
        save_correspondence(truth.correspondence, correspondence[-1])
        logger.debug(f"Wrote frame {index} and its ground truth")

    _warn_clipped('frames', clipped)

    manifest = out_dir / MANIFEST_NAME
    write_manifest(frames, manifest, header='observed frames')
    write_manifest(truths, out_dir / TRUTH_MANIFEST_NAME, header='contaminated albedo per frame')
    write_document(out_dir / REGISTRATION_NAME, {
        'schema': SCHEMA_VERSION,
        'correspondence': [path.relative_to(out_dir).as_posix() for path in correspondence],
    })

    if water_frames:
        water = []
        for index, frame in enumerate(water_frames):
            water.append(out_dir / 'water' / f"water_{index:04d}.png")
            save_frame(frame, water[-1], depth=depth, clamp=True)
        _warn_clipped('water-column frames', [clipped_fraction(frame) for frame in water_frames])
        write_manifest(water, out_dir / WATER_MANIFEST_NAME, header='water-column frames')

    logger.info(
        f"Wrote {len(frames)} frames"
        + (f" and {len(water_frames)} water-column frames" if water_frames else '')
        + f" to {out_dir}"
    )
    return manifest
