"""
Orthographic ray generation clipped to the bounding cube [-1, 1]^3
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..conditioning.camera import Camera

CUBE_MIN = -1.0
CUBE_MAX = 1.0


@dataclass(eq=False)
class RayBatch:
    """
    Rays starting on the entry face of the bounding cube.

    near is 0 and far is the in-cube segment length for valid rays; rays
    that miss the cube are flagged invalid and render as zero.
    """
    origins: np.ndarray
    directions: np.ndarray
    near: np.ndarray
    far: np.ndarray
    valid: np.ndarray
    pixels: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return self.origins.shape[0]

    def points(self, depths: np.ndarray) -> np.ndarray:
        """World positions (R, S, 3) for depths (R, S)"""
        return self.origins[:, None, :] + depths[..., None] * self.directions[:, None, :]

    def subset(self, index) -> 'RayBatch':
        return RayBatch(self.origins[index], self.directions[index], self.near[index],
                        self.far[index], self.valid[index],
                        None if self.pixels is None else self.pixels[index])


def cube_interval(origins: np.ndarray, directions: np.ndarray):
    """Slab test: entry/exit depths and hit flags for rays against the cube"""
    t_enter = np.full(origins.shape[0], -np.inf)
    t_exit = np.full(origins.shape[0], np.inf)
    hit = np.ones(origins.shape[0], dtype=bool)
    for axis in range(3):
        o = origins[:, axis]
        d = directions[:, axis]
        parallel = np.abs(d) < 1e-12
        hit &= ~(parallel & ((o < CUBE_MIN) | (o > CUBE_MAX)))
        with np.errstate(divide='ignore', invalid='ignore'):
            t1 = np.where(parallel, -np.inf, (CUBE_MIN - o) / d)
            t2 = np.where(parallel, np.inf, (CUBE_MAX - o) / d)
        t_enter = np.maximum(t_enter, np.minimum(t1, t2))
        t_exit = np.minimum(t_exit, np.maximum(t1, t2))
    hit &= t_exit > t_enter + 1e-12
    return t_enter, t_exit, hit


def gen_rays(camera: Camera, pixels: Optional[np.ndarray] = None) -> RayBatch:
    """
    One orthographic ray per (row, col) pixel; all pixels when omitted.
    """
    if pixels is None:
        pixels = camera.all_pixels()
    pixels = np.atleast_2d(np.asarray(pixels))
    rows, cols = pixels[:, 0], pixels[:, 1]
    if np.any(rows < 0) or np.any(rows >= camera.height) or np.any(cols < 0) or np.any(cols >= camera.width):
        raise ValueError(f"Pixels outside the {camera.width}x{camera.height} image")

    uv = camera.pixel_to_uv(rows, cols)
    plane = camera.unproject(uv, 0.0)
    direction = camera.direction / np.linalg.norm(camera.direction)
    directions = np.broadcast_to(direction, plane.shape).copy()

    t_enter, t_exit, hit = cube_interval(plane, directions)
    origins = np.where(hit[:, None], plane + np.where(hit, t_enter, 0.0)[:, None] * directions, plane)
    far = np.where(hit, t_exit - t_enter, 1.0)
    return RayBatch(origins=origins, directions=directions, near=np.zeros(len(plane)),
                    far=far, valid=hit, pixels=pixels)
