"""
Single-scattering backscatter along viewing rays.

Every sample point on a ray receives light from each source (cone fall-off,
attenuation over the source distance), scatters a fraction towards the camera
according to a Henyey-Greenstein phase function, and is attenuated again on
the way back. The integral is evaluated with the midpoint rule.
"""
import logging

import numpy as np

from raster.exceptions import ArgumentError

logger = logging.getLogger(__name__)


def henyey_greenstein(g, cos_theta):
    """Phase function value per steradian for scattering angle cosine ``cos_theta``"""
    g2 = g * g
    return (1.0 - g2) / (4.0 * np.pi * (1.0 + g2 - 2.0 * g * cos_theta) ** 1.5)


def _check_steps(steps):
    if steps is None or steps < 1:
        raise ArgumentError(f"Quadrature step count must be positive, got {steps}")
    return int(steps)


def _in_scatter(scene, points, toward_camera):
    """
    Light scattered towards the camera per unit length at ``points`` (N, 3),
    before the return-path attenuation. Returns (channels, N).
    """
    water = scene.water
    eta = scene.per_channel(water.eta)[:, np.newaxis]
    beta = scene.per_channel(water.beta_scale)[:, np.newaxis]
    total = np.zeros((scene.channels, len(points)))
    for light in scene.lights:
        offset = points - light.position
        distance = np.linalg.norm(offset, axis=1)
        distance = np.maximum(distance, 1e-9)
        propagation = offset / distance[:, np.newaxis]
        theta = np.arccos(np.clip(propagation @ light.direction, -1.0, 1.0))
        falloff = np.exp(-theta ** 2 / (2.0 * light.cone_sigma ** 2))
        phase = henyey_greenstein(water.hg_g, np.einsum('ij,ij->i', propagation, toward_camera))
        intensity = scene.per_channel(light.intensity)[:, np.newaxis]
        total += intensity * falloff * phase * np.exp(-eta * distance)
    return beta * total


def integrate_rays(scene, directions, ranges, steps):
    """
    Backscatter collected by unit camera-frame rays ``directions`` (N, 3) over
    [0, ranges] (N,). Returns (channels, N).
    """
    steps = _check_steps(steps)
    directions = np.asarray(directions, dtype=np.float64).reshape(-1, 3)
    ranges = np.broadcast_to(np.asarray(ranges, dtype=np.float64), (len(directions),))
    eta = scene.per_channel(scene.water.eta)[:, np.newaxis]
    step = ranges / steps
    toward_camera = -directions
    result = np.zeros((scene.channels, len(directions)))
    for k in range(steps):
        s = (k + 0.5) * step
        points = directions * s[:, np.newaxis]
        result += _in_scatter(scene, points, toward_camera) * np.exp(-eta * s) * step
    return result


def integrate_backscatter(scene, direction, max_distance=None, steps=None):
    """
    Per-channel backscatter for one camera-frame viewing direction.

    The ray is integrated up to the seafloor when it hits it, otherwise up to
    ``max_distance`` (default: the scene's water max_distance).
    """
    steps = _check_steps(steps if steps is not None else scene.water.steps)
    direction = np.asarray(direction, dtype=np.float64).reshape(3)
    direction = direction / np.linalg.norm(direction)
    if max_distance is None:
        max_distance = seafloor_distance(scene, direction[np.newaxis])[0]
        if not np.isfinite(max_distance):
            max_distance = scene.water.max_distance
    return integrate_rays(scene, direction[np.newaxis], max_distance, steps)[:, 0]


def cumulative_backscatter(scene, direction, max_distance=None, steps=2000):
    """
    Backscatter collected up to each distance along a ray.

    Returns (distances, cumulative) with cumulative of shape (channels, steps);
    distances are the end of each integration step.
    """
    steps = _check_steps(steps)
    max_distance = scene.water.max_distance if max_distance is None else max_distance
    direction = np.asarray(direction, dtype=np.float64).reshape(1, 3)
    direction = direction / np.linalg.norm(direction)
    eta = scene.per_channel(scene.water.eta)[:, np.newaxis]
    step = max_distance / steps
    s = (np.arange(steps) + 0.5) * step
    points = s[:, np.newaxis] * direction
    contributions = _in_scatter(scene, points, np.repeat(-direction, steps, axis=0)) * np.exp(-eta * s) * step
    return (np.arange(1, steps + 1) * step), np.cumsum(contributions, axis=1)


def seafloor_distance(scene, directions, pose=None):
    """Distance along each camera-frame ray to the seafloor plane; inf for rays that miss it"""
    pose = pose or scene.pose
    normal = pose.seafloor_normal()
    facing = directions @ normal
    distance = np.full(len(directions), np.inf)
    hits = facing < -1e-12
    distance[hits] = -pose.altitude / facing[hits]
    return distance


def backscatter_field(scene, pose=None, steps=None, water_column=False):
    """
    Backscatter for every pixel, (channels, height, width).

    Rays end at the seafloor, or at the water max_distance when they miss it
    or when ``water_column`` is set.
    """
    pose = pose or scene.pose
    camera = scene.camera
    directions = camera.rays()
    if water_column:
        ranges = np.full(len(directions), scene.water.max_distance)
    else:
        ranges = seafloor_distance(scene, directions, pose)
        ranges[~np.isfinite(ranges)] = scene.water.max_distance
    values = integrate_rays(scene, directions, ranges, steps if steps is not None else scene.water.steps)
    logger.debug(f"Integrated backscatter for {len(directions)} rays at altitude {pose.altitude}")
    return values.reshape(scene.channels, camera.height, camera.width)
