"""
Frame and mask file I/O.

PNG headers are inspected with Pillow (alpha, palette, truncation) and pixels
are decoded/encoded with OpenCV; TIFF goes through tifffile. Pixel values are
mapped to linear radiance with full scale = 1.0.
"""
import logging
from pathlib import Path

import cv2
import numpy as np
import tifffile
from PIL import Image, UnidentifiedImageError

from .exceptions import ArgumentError, DataError, FormatError, ImageIOError, RangeError
from .planes import Frame

logger = logging.getLogger(__name__)

PNG_SUFFIXES = {'.png'}
TIFF_SUFFIXES = {'.tif', '.tiff'}
GAMMA_MODES = ('srgb', 'linear')

# Pillow modes whose pixels we can decode; anything else is rejected up front.
PNG_MODES = {'L', 'RGB', 'I', 'I;16', 'I;16B', 'I;16L', 'I;16N'}
ALPHA_MODES = {'RGBA', 'RGBa', 'LA', 'La', 'PA'}


def srgb_to_linear(values):
    values = np.asarray(values, dtype=np.float64)
    return np.where(values <= 0.04045, values / 12.92, ((values + 0.055) / 1.055) ** 2.4)


def linear_to_srgb(values):
    values = np.asarray(values, dtype=np.float64)
    return np.where(values <= 0.0031308, values * 12.92, 1.055 * values ** (1 / 2.4) - 0.055)


def _suffix(path):
    suffix = Path(path).suffix.lower()
    if suffix not in PNG_SUFFIXES | TIFF_SUFFIXES:
        raise FormatError(f"Unsupported image format '{suffix}' for {path} (PNG or TIFF only)")
    return suffix


def _inspect_png(path):
    try:
        with Image.open(path) as image:
            mode = image.mode
            has_transparency = 'transparency' in image.info
            image.verify()
    except UnidentifiedImageError as exc:
        raise FormatError(f"Not a readable PNG: {path}") from exc
    except (OSError, SyntaxError, ValueError) as exc:
        raise ImageIOError(f"Corrupt or truncated image {path}: {exc}", path) from exc
    if mode in ALPHA_MODES or has_transparency:
        raise FormatError(f"Alpha channels are not supported: {path} ({mode})")
    if mode not in PNG_MODES:
        raise FormatError(f"Unsupported PNG mode {mode} in {path}")


def _read_png(path):
    _inspect_png(path)
    pixels = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if pixels is None:
        raise ImageIOError(f"Failed to decode {path}", path)
    if pixels.ndim == 3:
        if pixels.shape[2] != 3:
            raise FormatError(f"Unsupported channel count {pixels.shape[2]} in {path}")
        pixels = cv2.cvtColor(pixels, cv2.COLOR_BGR2RGB)
    return pixels


def _read_tiff(path):
    try:
        with tifffile.TiffFile(path) as tif:
            page = tif.pages[0]
            if page.extrasamples:
                raise FormatError(f"Alpha channels are not supported: {path}")
            pixels = page.asarray()
    except FormatError:
        raise
    except (tifffile.TiffFileError, OSError, ValueError) as exc:
        raise ImageIOError(f"Corrupt or unreadable TIFF {path}: {exc}", path) from exc
    if pixels.ndim == 3 and pixels.shape[2] != 3:
        raise FormatError(f"Unsupported channel layout {pixels.shape} in {path}")
    if pixels.ndim not in (2, 3):
        raise FormatError(f"Unsupported channel layout {pixels.shape} in {path}")
    return pixels


def load_frame(path, gamma=None, index=0, tag=None):
    """
    Read a PNG or TIFF (8/16-bit, gray or RGB) as a linear-radiance frame.

    ``gamma`` is 'srgb', 'linear' or None; None decodes 8-bit input as sRGB
    and 16-bit input as linear.
    """
    path = Path(path)
    suffix = _suffix(path)
    if gamma is not None and gamma not in GAMMA_MODES:
        raise ArgumentError(f"Unknown gamma mode '{gamma}'")
    if not path.is_file():
        raise ImageIOError(f"Cannot read {path}: no such file", path)

    pixels = _read_png(path) if suffix in PNG_SUFFIXES else _read_tiff(path)

    if pixels.dtype == np.uint8:
        values = pixels / 255.0
        mode = gamma or 'srgb'
    elif pixels.dtype == np.uint16:
        values = pixels / 65535.0
        mode = gamma or 'linear'
    else:
        raise FormatError(f"Unsupported bit depth ({pixels.dtype}) in {path}")
    if mode == 'srgb':
        values = srgb_to_linear(values)

    if values.ndim == 3:
        values = values.transpose(2, 0, 1)
    logger.debug(f"Loaded {path} ({pixels.dtype}, {mode})")
    return Frame.from_array(values, index=index, tag=tag if tag is not None else str(path))


def _as_array(frame):
    if isinstance(frame, Frame):
        return frame.stack()
    array = np.asarray(frame, dtype=np.float64)
    return array[np.newaxis] if array.ndim == 2 else array


def save_frame(frame, path, depth=16, gamma=None, clamp=False):
    """
    Write a frame (or a (channels, height, width) array) as PNG or TIFF.

    ``gamma`` None encodes 8-bit output as sRGB and 16-bit output as linear,
    matching the default decode of :func:`load_frame`.

    Values outside [0, 1] are clipped when ``clamp`` is set and rejected
    otherwise.
    """
    path = Path(path)
    suffix = _suffix(path)
    if depth not in (8, 16):
        raise ArgumentError(f"Bit depth must be 8 or 16, got {depth}")
    if gamma is None:
        gamma = 'srgb' if depth == 8 else 'linear'
    if gamma not in GAMMA_MODES:
        raise ArgumentError(f"Unknown gamma mode '{gamma}'")

    values = _as_array(frame)
    if values.shape[0] not in (1, 3):
        raise FormatError(f"Cannot write {values.shape[0]} channels to {path}")
    if not np.isfinite(values).all():
        raise DataError(f"Refusing to write non-finite pixels to {path}")
    if clamp:
        values = np.clip(values, 0.0, 1.0)
    elif values.min() < 0.0 or values.max() > 1.0:
        raise RangeError(
            f"Pixel values span [{values.min():.4g}, {values.max():.4g}], outside [0, 1]; "
            f"enable clamping to write {path}"
        )
    if gamma == 'srgb':
        values = linear_to_srgb(values)

    full_scale = (1 << depth) - 1
    dtype = np.uint8 if depth == 8 else np.uint16
    pixels = np.round(values * full_scale).astype(dtype)
    pixels = pixels[0] if pixels.shape[0] == 1 else pixels.transpose(1, 2, 0)

    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if suffix in PNG_SUFFIXES:
            if pixels.ndim == 3:
                pixels = cv2.cvtColor(pixels, cv2.COLOR_RGB2BGR)
            if not cv2.imwrite(str(path), pixels):
                raise ImageIOError(f"Failed to write {path}", path)
        else:
            photometric = 'rgb' if pixels.ndim == 3 else 'minisblack'
            tifffile.imwrite(path, pixels, photometric=photometric)
    except OSError as exc:
        raise ImageIOError(f"Failed to write {path}: {exc}", path) from exc
    logger.debug(f"Wrote {path} ({depth}-bit, {gamma})")


def save_correspondence(coordinates, path):
    """Write a (2, height, width) seafloor-coordinate map as a float32 TIFF"""
    path = Path(path)
    coordinates = np.asarray(coordinates, dtype=np.float32)
    if coordinates.ndim != 3 or coordinates.shape[0] != 2:
        raise ArgumentError(f"Correspondence maps are (2, height, width), got {coordinates.shape}")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tifffile.imwrite(path, coordinates, photometric='minisblack', planarconfig='separate')
    except OSError as exc:
        raise ImageIOError(f"Failed to write {path}: {exc}", path) from exc


def load_correspondence(path):
    path = Path(path)
    try:
        coordinates = tifffile.imread(path)
    except (tifffile.TiffFileError, OSError, ValueError) as exc:
        raise ImageIOError(f"Cannot read correspondence map {path}: {exc}", path) from exc
    if coordinates.ndim != 3 or coordinates.shape[0] != 2:
        raise FormatError(f"{path} is not a two-channel correspondence map ({coordinates.shape})")
    return coordinates.astype(np.float64)


def save_mask(mask, path):
    """Write a boolean mask as a 1-bit PNG"""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(np.asarray(mask, dtype=bool)).save(path, format='PNG')
    except OSError as exc:
        raise ImageIOError(f"Failed to write mask {path}: {exc}", path) from exc


def load_mask(path):
    path = Path(path)
    try:
        with Image.open(path) as image:
            return np.array(image.convert('1'), dtype=bool)
    except (UnidentifiedImageError, OSError) as exc:
        raise ImageIOError(f"Failed to read mask {path}: {exc}", path) from exc
