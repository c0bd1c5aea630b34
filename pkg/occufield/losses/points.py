"""
Point supervision sets for the per-point reconstruction loss
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np

POINTS_MAGIC = b"PTS1"


@dataclass(eq=False)
class PointSampleSet:
    """Occupancy points with binary targets and near-surface color points"""
    occupancy_points: np.ndarray   # (n_o, 3)
    occupancy: np.ndarray          # (n_o,) in {0, 1}
    color_points: np.ndarray       # (n_c, 3)
    colors: np.ndarray             # (n_c, 3) in [0, 1]

    def __post_init__(self):
        self.occupancy_points = np.asarray(self.occupancy_points, dtype=np.float64).reshape(-1, 3)
        self.occupancy = np.asarray(self.occupancy, dtype=np.float64).reshape(-1)
        self.color_points = np.asarray(self.color_points, dtype=np.float64).reshape(-1, 3)
        self.colors = np.asarray(self.colors, dtype=np.float64).reshape(-1, 3)
        if len(self.occupancy) != len(self.occupancy_points) or len(self.colors) != len(self.color_points):
            raise ValueError("PointSampleSet point and target counts differ")
        if not np.all((self.occupancy == 0.0) | (self.occupancy == 1.0)):
            raise ValueError("Occupancy targets must be binary")

    def subset(self, occupancy_index, color_index) -> 'PointSampleSet':
        return PointSampleSet(self.occupancy_points[occupancy_index], self.occupancy[occupancy_index],
                              self.color_points[color_index], self.colors[color_index])

    def draw(self, n_occupancy: int, n_color: int, rng: np.random.Generator) -> 'PointSampleSet':
        """Random minibatch (with replacement when the pool is smaller)"""
        occ = rng.choice(len(self.occupancy), size=n_occupancy, replace=n_occupancy > len(self.occupancy))
        col = rng.choice(len(self.colors), size=n_color, replace=n_color > len(self.colors))
        return self.subset(occ, col)


def sample_points(scene, n_occupancy: int, n_color: int, sigma: float = 0.05,
                  rng: np.random.Generator = None) -> PointSampleSet:
    """
    Occupancy points: half uniform in the cube, half surface points with
    isotropic Gaussian noise sigma. Color points: surface points with noise
    sigma / 2. Targets come from the scene's exact oracles.
    """
    if n_occupancy < 1 or n_color < 1:
        raise ValueError(f"Point counts must be >= 1, got {n_occupancy}/{n_color}")
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if rng is None:
        raise ValueError("sample_points needs an explicit random stream")
    n_surface = n_occupancy // 2
    n_uniform = n_occupancy - n_surface
    uniform = rng.uniform(-1.0, 1.0, size=(n_uniform, 3))
    near = scene.sample_surface(n_surface, rng) + rng.normal(0.0, sigma, size=(n_surface, 3)) if n_surface else np.zeros((0, 3))
    occupancy_points = np.concatenate([uniform, near], axis=0)
    color_points = scene.sample_surface(n_color, rng) + rng.normal(0.0, 0.5 * sigma, size=(n_color, 3))
    return PointSampleSet(occupancy_points, scene.occupancy(occupancy_points),
                          color_points, scene.color(color_points))


def write_points(path: str, points: PointSampleSet) -> str:
    """PTS1 file: magic, uint32 counts, then little-endian float64 arrays"""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'wb') as f:
        f.write(POINTS_MAGIC)
        f.write(struct.pack('<II', len(points.occupancy), len(points.colors)))
        for array in (points.occupancy_points, points.occupancy, points.color_points, points.colors):
            f.write(np.ascontiguousarray(array, dtype='<f8').tobytes())
    return path


def read_points(path: str) -> PointSampleSet:
    with open(path, 'rb') as f:
        payload = f.read()
    if payload[:4] != POINTS_MAGIC:
        raise ValueError(f"{path}: not a point sample file")
    n_o, n_c = struct.unpack('<II', payload[4:12])
    sizes = [n_o * 3, n_o, n_c * 3, n_c * 3]
    expected = 12 + 8 * sum(sizes)
    if len(payload) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(payload)}")
    arrays, offset = [], 12
    for size in sizes:
        arrays.append(np.frombuffer(payload, dtype='<f8', count=size, offset=offset).astype(np.float64))
        offset += 8 * size
    return PointSampleSet(arrays[0].reshape(-1, 3), arrays[1], arrays[2].reshape(-1, 3), arrays[3].reshape(-1, 3))
