"""
Frame normalization: A = (I - I_s) / F.
"""
import numpy as np

from raster.exceptions import ArgumentError
from raster.parallel import map_ordered
from raster.planes import Frame


def enhance(frame, scatter, factor, config=None, epsilon=None, clamp=None):
    """
    Remove backscatter and divide by the factor field.

    Pixels where the factor is invalid in any channel are set to 0; they are
    the complement of ``factor.coverage``. ``epsilon`` and ``clamp`` default
    to the values in ``config``.
    """
    if epsilon is None:
        epsilon = config.epsilon if config is not None else 1e-4
    if clamp is None:
        clamp = config.clamp_output if config is not None else False
    for name, other in (('scatter', scatter), ('factor', factor)):
        if other.size != frame.size or other.channels != frame.channels:
            raise ArgumentError(
                f"{name} field {other.channels}x{other.width}x{other.height} does not match "
                f"frame {frame.index} ({frame.channels}x{frame.width}x{frame.height})"
            )

    coverage = factor.coverage

    def normalize(channel):
        observed, additive, multiplicative = channel
        out = np.maximum(observed.data - additive.data, 0.0) / np.maximum(multiplicative.data, epsilon)
        out[~coverage] = 0.0
        if clamp:
            np.clip(out, 0.0, 1.0, out=out)
        return out

    planes = map_ordered(normalize, zip(frame.planes, scatter.planes, factor.planes))
    return Frame.from_array(np.stack(planes), index=frame.index, tag=frame.tag)
