"""
Error vocabulary shared by every app.

Management commands map these onto exit codes (see cli.base).
"""


class SeafloorError(Exception):
    """Base class for all processing errors"""


class ArgumentError(SeafloorError, ValueError):
    """Invalid argument or violated precondition"""


class FormatError(SeafloorError, ValueError):
    """Unsupported file format, bit depth or channel layout"""


class DataError(SeafloorError, ValueError):
    """Pixel data that cannot be represented (NaN, inf)"""


class RangeError(SeafloorError, ValueError):
    """Pixel values outside [0, 1] with clamping disabled"""


class StreamError(SeafloorError, RuntimeError):
    """Inhomogeneous or too-short frame stream"""


class MetricError(SeafloorError, ValueError):
    """Metric undefined for the given inputs (e.g. empty overlap)"""


class ImageIOError(SeafloorError, OSError):
    """File could not be read or written"""

    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path
