"""
Sequences of frames along a trajectory, and water-column frames for scatter
estimation.
"""
import logging
from dataclasses import dataclass

import numpy as np

from raster.exceptions import ArgumentError
from raster.planes import Frame

from .render import render_frame
from .scattering import backscatter_field
from .scene import Pose

logger = logging.getLogger(__name__)


@dataclass
class RenderedSequence:
    frames: list
    truths: list

    @property
    def correspondences(self):
        return [truth.correspondence for truth in self.truths]

    def __len__(self):
        return len(self.frames)


def transect(start, step, count, altitude, pitch=0.0, roll=0.0):
    """Evenly spaced poses along a straight line at constant attitude"""
    if count < 1:
        raise ArgumentError(f"Transect needs at least one pose, got {count}")
    return [
        Pose(altitude=altitude, pitch=pitch, roll=roll, x=start[0] + i * step[0], y=start[1] + i * step[1])
        for i in range(count)
    ]


def frame_rng(seed, index):
    """Independent, reproducible random stream per frame"""
    return np.random.default_rng([int(seed), int(index)])


def render_sequence(scene, trajectory, contamination_seed=None):
    """
    Render every pose of ``trajectory`` over the scene's albedo map.

    Transient contamination is drawn per frame; backscatter is computed once
    per distinct (altitude, pitch, roll).
    """
    poses = list(trajectory)
    if not poses:
        raise ArgumentError("Trajectory is empty")
    seed = scene.seed if contamination_seed is None else contamination_seed
    cache = {}
    frames, truths = [], []
    for index, pose in enumerate(poses):
        if pose.orientation not in cache:
            cache[pose.orientation] = backscatter_field(scene, pose)
        frame, truth = render_frame(
            scene, pose=pose, rng=frame_rng(seed, index), scatter=cache[pose.orientation], index=index
        )
        frames.append(frame)
        truths.append(truth)
    logger.info(f"Rendered {len(frames)} frames ({len(cache)} distinct backscatter fields)")
    return RenderedSequence(frames, truths)


def stamp_particles(values, count, radius, rng):
    """Add bright and dark discs in image space to (channels, h, w) ``values``"""
    channels, height, width = values.shape
    rows, cols = np.mgrid[0:height, 0:width]
    for _ in range(count):
        cy, cx = rng.uniform(0, height), rng.uniform(0, width)
        r = rng.uniform(*radius)
        disc = (rows + 0.5 - cy) ** 2 + (cols + 0.5 - cx) ** 2 <= r * r
        if rng.random() < 0.5:
            values[:, disc] += rng.uniform(0.2, 0.6)
        else:
            values[:, disc] *= rng.uniform(0.0, 0.3)
    return values


def render_water_column(scene, count=None, particle_rate=None, seed=None):
    """
    Frames far above the seafloor: backscatter integrated to max_distance
    plus floating particles covering about ``particle_rate`` of each frame.

    Returns (frames, scatter) where scatter is the particle-free truth.
    """
    spec = scene.water_column
    count = count if count is not None else (spec.count if spec else 7)
    particle_rate = particle_rate if particle_rate is not None else (spec.particle_rate if spec else 0.05)
    radius = spec.particle_radius if spec else (1.0, 4.0)
    if count < 1:
        raise ArgumentError(f"Water-column frame count must be positive, got {count}")
    if not 0.0 <= particle_rate < 0.5:
        raise ArgumentError(f"particle_rate must lie in [0, 0.5), got {particle_rate}")

    scatter = backscatter_field(scene, water_column=True)
    camera = scene.camera
    mean_area = np.pi * np.mean(np.square(radius))
    particles = int(round(particle_rate * camera.width * camera.height / mean_area))
    seed = scene.seed if seed is None else seed
    frames = []
    for index in range(count):
        values = stamp_particles(scatter.copy(), particles, radius, frame_rng(seed, 10000 + index))
        frames.append(Frame.from_array(values, index=index))
    logger.info(f"Rendered {count} water-column frames with {particles} particles each")
    return frames, scatter
