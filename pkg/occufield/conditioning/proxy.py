"""
Coarse occupancy proxy of a scene

The proxy stands in for a body-model prior: it is the scene's primitives
inflated by a blur radius and voxelized over the bounding cube [-1, 1]^3.
Grid arrays are indexed (z, y, x) and voxel i along an axis covers the cell
centered at (2i + 1) / res - 1.
"""

from __future__ import annotations

import logging
import os
import struct
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

PROXY_MAGIC = b"VOX1"


@dataclass(eq=False)
class ProxyVolume:
    """Binary occupancy grid, shape (res, res, res), axes (z, y, x)"""
    grid: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid)
        if grid.ndim != 3 or len(set(grid.shape)) != 1:
            raise ValueError(f"ProxyVolume grid must be a cube, got shape {grid.shape}")
        if not np.all((grid == 0) | (grid == 1)):
            raise ValueError("ProxyVolume grid values must be 0 or 1")
        if not grid.any():
            raise ValueError("ProxyVolume is empty")
        self.grid = grid.astype(np.uint8)

    @property
    def resolution(self) -> int:
        return self.grid.shape[0]

    @property
    def occupied(self) -> int:
        return int(self.grid.sum())


def voxel_centers(res: int) -> np.ndarray:
    """World (x, y, z) of every voxel center, shape (res, res, res, 3) indexed (z, y, x)"""
    axis = (2.0 * np.arange(res) + 1.0) / res - 1.0
    z, y, x = np.meshgrid(axis, axis, axis, indexing='ij')
    return np.stack([x, y, z], axis=-1)


def cube_to_grid_coords(points: np.ndarray, res: int) -> np.ndarray:
    """
    Map world points in the bounding cube to align-corners grid coordinates,
    so voxel centers land exactly on grid sites.
    """
    return np.asarray(points, dtype=np.float64) * (res / (res - 1.0))


def voxelize_proxy(scene, res: int = 32, inflation: float = 0.05) -> ProxyVolume:
    """
    Voxelize `scene` (anything exposing `sdf(points) -> distances`).

    A voxel is occupied iff its center lies within `inflation` of the
    scene surface or inside it; inflation 0 yields the exact occupancy grid.
    """
    if res < 8:
        raise ValueError(f"Proxy resolution must be >= 8, got {res}")
    if inflation < 0:
        raise ValueError(f"Proxy inflation must be non-negative, got {inflation}")
    centers = voxel_centers(res).reshape(-1, 3)
    distance = scene.sdf(centers)
    grid = (distance <= inflation).reshape(res, res, res)
    if not grid.any():
        raise ValueError("Voxelized proxy is empty (degenerate scene)")
    logger.debug(f"Proxy voxelized at {res}^3: {int(grid.sum())} occupied voxels")
    return ProxyVolume(grid.astype(np.uint8))


def write_proxy(path: str, proxy: ProxyVolume) -> str:
    """VOX1 file: magic, uint32 resolution, bit-packed occupancy"""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'wb') as f:
        f.write(PROXY_MAGIC)
        f.write(struct.pack('<I', proxy.resolution))
        f.write(np.packbits(proxy.grid.reshape(-1)).tobytes())
    return path


def read_proxy(path: str) -> ProxyVolume:
    with open(path, 'rb') as f:
        payload = f.read()
    if payload[:4] != PROXY_MAGIC:
        raise ValueError(f"{path}: not a proxy volume file")
    (res,) = struct.unpack('<I', payload[4:8])
    bits = np.unpackbits(np.frombuffer(payload[8:], dtype=np.uint8))
    if bits.size < res ** 3:
        raise ValueError(f"{path}: truncated proxy volume")
    return ProxyVolume(bits[:res ** 3].reshape(res, res, res))
