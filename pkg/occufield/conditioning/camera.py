"""
Orthographic cameras

Conventions:
  - A camera maps world p to q = rotation @ (p - center) / half_extent and
    reports (u, v) = (q.x, q.y) with depth q.z.
  - The viewing direction is -rotation[2]; the front camera (azimuth 0,
    identity rotation) looks along world -z.
  - Image coordinates are normalized to [-1, 1]^2 with (-1, -1) at the
    top-left pixel center and (+1, +1) at the bottom-right pixel center, so
    world +y points down the image.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np


@dataclass(eq=False)
class Camera:
    """Orthographic view descriptor"""
    rotation: np.ndarray
    center: np.ndarray = field(default_factory=lambda: np.zeros(3))
    half_extent: float = 1.0
    image_size: Tuple[int, int] = (128, 128)  # (W, H)

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        self.center = np.asarray(self.center, dtype=np.float64).reshape(3)
        self.half_extent = float(self.half_extent)
        self.image_size = (int(self.image_size[0]), int(self.image_size[1]))
        if not np.allclose(self.rotation @ self.rotation.T, np.eye(3), atol=1e-9):
            raise ValueError(f"Camera rotation is not orthonormal:\n{self.rotation}")
        if self.half_extent <= 0:
            raise ValueError(f"half_extent must be positive, got {self.half_extent}")
        if min(self.image_size) < 2:
            raise ValueError(f"image_size must be at least 2x2, got {self.image_size}")

    @classmethod
    def orbit(cls, azimuth_deg: float, image_size: Tuple[int, int] = (128, 128),
              half_extent: float = 1.0, center=None) -> 'Camera':
        """Camera on the horizontal ring; azimuth 0 = front, 180 = back"""
        theta = np.deg2rad(azimuth_deg)
        c, s = np.cos(theta), np.sin(theta)
        rotation = np.array([[c, 0.0, -s],
                             [0.0, 1.0, 0.0],
                             [s, 0.0, c]])
        # snap round-off so 90-degree multiples are exact
        rotation[np.abs(rotation) < 1e-15] = 0.0
        return cls(rotation=rotation, center=np.zeros(3) if center is None else center,
                   half_extent=half_extent, image_size=image_size)

    @property
    def width(self) -> int:
        return self.image_size[0]

    @property
    def height(self) -> int:
        return self.image_size[1]

    @property
    def direction(self) -> np.ndarray:
        return -self.rotation[2]

    def project(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """World points (N, 3) -> normalized uv (N, 2) and depth (N,)"""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        q = (points - self.center) @ self.rotation.T / self.half_extent
        return q[:, :2], q[:, 2]

    def unproject(self, uv: np.ndarray, depth) -> np.ndarray:
        """Inverse of project"""
        uv = np.atleast_2d(np.asarray(uv, dtype=np.float64))
        depth = np.broadcast_to(np.asarray(depth, dtype=np.float64), (uv.shape[0],))
        q = np.concatenate([uv, depth[:, None]], axis=1)
        return q * self.half_extent @ self.rotation + self.center

    def pixel_to_uv(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.float64)
        cols = np.asarray(cols, dtype=np.float64)
        u = -1.0 + 2.0 * cols / (self.width - 1)
        v = -1.0 + 2.0 * rows / (self.height - 1)
        return np.stack([u, v], axis=-1)

    def uv_to_pixel(self, uv: np.ndarray) -> np.ndarray:
        """Normalized uv -> fractional (row, col)"""
        uv = np.asarray(uv, dtype=np.float64)
        cols = (uv[..., 0] + 1.0) * 0.5 * (self.width - 1)
        rows = (uv[..., 1] + 1.0) * 0.5 * (self.height - 1)
        return np.stack([rows, cols], axis=-1)

    def all_pixels(self) -> np.ndarray:
        """(H*W, 2) integer (row, col) pairs in row-major order"""
        rows, cols = np.meshgrid(np.arange(self.height), np.arange(self.width), indexing='ij')
        return np.stack([rows.reshape(-1), cols.reshape(-1)], axis=1)

    def to_dict(self) -> dict:
        return {
            'rotation': self.rotation.reshape(-1),
            'center': self.center,
            'half_extent': self.half_extent,
            'image_size': list(self.image_size),
        }

    @classmethod
    def from_dict(cls, values: dict) -> 'Camera':
        return cls(rotation=np.asarray(values['rotation'], dtype=np.float64).reshape(3, 3),
                   center=values['center'], half_extent=values['half_extent'],
                   image_size=tuple(int(v) for v in values['image_size']))


def backside_azimuth(azimuth_deg: float) -> float:
    return (azimuth_deg + 180.0) % 360.0
