"""
Forward model: observed = direct(light, attenuation, albedo) + backscatter.
"""
import logging
from dataclasses import dataclass

import numpy as np

from raster.exceptions import ArgumentError
from raster.planes import FactorField, Frame, ScatterField

from .scattering import backscatter_field, seafloor_distance

logger = logging.getLogger(__name__)

MAX_CONTAMINATION_OBJECTS = 100000


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """
    Layers behind one rendered frame.

    ``albedo`` includes the transient objects, ``clean_albedo`` does not;
    ``correspondence`` holds the seafloor (x, y) of every pixel, NaN where
    the ray misses the seafloor.
    """

    albedo: Frame
    clean_albedo: Frame
    scatter: ScatterField
    factor: FactorField
    contamination_mask: np.ndarray
    correspondence: np.ndarray

    @property
    def seafloor_mask(self):
        return np.isfinite(self.correspondence[0])


@dataclass(frozen=True, eq=False)
class Geometry:
    directions: np.ndarray
    hits: np.ndarray
    distance: np.ndarray
    points: np.ndarray
    world_x: np.ndarray
    world_y: np.ndarray
    normal: np.ndarray


def pixel_geometry(scene, pose=None):
    """Ray/seafloor intersections for every pixel of the scene camera"""
    pose = pose or scene.pose
    directions = scene.camera.rays()
    distance = seafloor_distance(scene, directions, pose)
    hits = np.isfinite(distance)
    points = np.zeros_like(directions)
    points[hits] = directions[hits] * distance[hits, np.newaxis]
    world = points @ pose.rotation().T + np.array([pose.x, pose.y, pose.altitude])
    world_x = np.where(hits, world[:, 0], np.nan)
    world_y = np.where(hits, world[:, 1], np.nan)
    return Geometry(directions, hits, distance, points, world_x, world_y, pose.seafloor_normal())


def direct_factor(scene, geometry):
    """Light reaching the camera from a unit-albedo seafloor, (channels, N)"""
    eta = scene.per_channel(scene.water.eta)[:, np.newaxis]
    hits = geometry.hits
    points = geometry.points[hits]
    camera_attenuation = np.exp(-eta * geometry.distance[hits])
    total = np.zeros((scene.channels, hits.sum()))
    for light in scene.lights:
        offset = points - light.position
        distance = np.maximum(np.linalg.norm(offset, axis=1), 1e-9)
        propagation = offset / distance[:, np.newaxis]
        theta = np.arccos(np.clip(propagation @ light.direction, -1.0, 1.0))
        falloff = np.exp(-theta ** 2 / (2.0 * light.cone_sigma ** 2))
        if scene.cosine_weighting:
            # Incidence cosine against the upward seafloor normal.
            falloff = falloff * np.clip(-(propagation @ geometry.normal), 0.0, None)
        intensity = scene.per_channel(light.intensity)[:, np.newaxis]
        total += intensity * falloff * np.exp(-eta * distance)
    factor = np.zeros((scene.channels, len(hits)))
    factor[:, hits] = total * camera_attenuation
    return factor


def stamp_contamination(spec, albedo, world_x, world_y, rng):
    """
    Paint random ellipses into ``albedo`` (channels, N) until ``spec.rate`` of
    the seafloor pixels are covered. Returns (albedo, mask).
    """
    hits = np.isfinite(world_x)
    mask = np.zeros(len(world_x), dtype=bool)
    if spec.rate <= 0 or not hits.any():
        return albedo, mask
    albedo = albedo.copy()
    xs, ys = world_x[hits], world_y[hits]
    covered = np.zeros(hits.sum(), dtype=bool)
    bounds = (xs.min(), xs.max(), ys.min(), ys.max())
    for _ in range(MAX_CONTAMINATION_OBJECTS):
        if covered.mean() >= spec.rate:
            break
        cx, cy = rng.uniform(bounds[0], bounds[1]), rng.uniform(bounds[2], bounds[3])
        a, b = rng.uniform(*spec.size, size=2)
        angle = rng.uniform(0.0, np.pi)
        bright = rng.random() < spec.bright_fraction
        value = rng.uniform(*(spec.bright if bright else spec.dark))
        dx, dy = xs - cx, ys - cy
        along = dx * np.cos(angle) + dy * np.sin(angle)
        across = -dx * np.sin(angle) + dy * np.cos(angle)
        inside = (along / a) ** 2 + (across / b) ** 2 <= 1.0
        covered |= inside
        index = np.flatnonzero(hits)[inside]
        albedo[:, index] = value
    mask[hits] = covered
    return albedo, mask


def render_frame(scene, pose=None, rng=None, scatter=None, index=0):
    """
    Render one frame of ``scene`` (optionally at another ``pose``).

    ``scatter`` may pass a precomputed backscatter array for this orientation.
    Returns (Frame, GroundTruth).
    """
    pose = pose or scene.pose
    camera = scene.camera
    rng = rng if rng is not None else np.random.default_rng(scene.seed)
    geometry = pixel_geometry(scene, pose)
    hits = geometry.hits
    if not scene.albedo.covers(geometry.world_x[hits], geometry.world_y[hits]).all():
        raise ArgumentError(
            f"Frame footprint at ({pose.x}, {pose.y}) exceeds the albedo map extent {scene.albedo.extent()}"
        )

    clean = np.zeros((scene.channels, len(hits)))
    if hits.any():
        clean[:, hits] = np.broadcast_to(
            scene.albedo.sample(geometry.world_x[hits], geometry.world_y[hits]),
            (scene.channels, hits.sum()),
        )
    albedo, mask = stamp_contamination(scene.contamination, clean, geometry.world_x, geometry.world_y, rng)

    factor = direct_factor(scene, geometry)
    if scatter is None:
        scatter = backscatter_field(scene, pose)
    shape = (scene.channels, camera.height, camera.width)
    observed = (factor * albedo).reshape(shape) + scatter

    factor_planes = factor.reshape(shape)
    truth = GroundTruth(
        albedo=Frame.from_array(albedo.reshape(shape), index=index),
        clean_albedo=Frame.from_array(clean.reshape(shape), index=index),
        scatter=ScatterField.from_array(scatter),
        factor=FactorField(Frame.from_array(factor_planes).planes, hits.reshape(shape[1:]) & (factor_planes > 0).all(axis=0)),
        contamination_mask=mask.reshape(shape[1:]),
        correspondence=np.stack([geometry.world_x, geometry.world_y]).reshape((2,) + shape[1:]),
    )
    logger.debug(f"Rendered frame {index}: {mask.mean():.1%} contaminated, {1 - hits.mean():.1%} background")
    return Frame.from_array(observed, index=index), truth
