"""
Isosurface extraction from occupancy fields
"""

from __future__ import annotations

import logging
from typing import Callable, Optional

import numpy as np
from skimage import measure
from tqdm import tqdm

from ..diffcore.tensor import Tensor, no_grad
from ..utils.helpers import chunk_slices
from ..utils.parallel import map_ordered
from .mesh import TriMesh

logger = logging.getLogger(__name__)

ISO_LEVEL = 0.5
DEFAULT_RESOLUTION = 128


def occupancy_function(source) -> Callable[[np.ndarray], np.ndarray]:
    """
    Normalize the accepted inputs to points (N, 3) -> alpha (N,):
    an object with an `occupancy` method (analytic scenes), a field returning
    (alpha, payloads), or a plain function returning alpha.
    """
    if hasattr(source, 'occupancy'):
        return source.occupancy

    def evaluate(points: np.ndarray) -> np.ndarray:
        with no_grad():
            out = source(points)
        if isinstance(out, tuple):
            out = out[0]
        if isinstance(out, Tensor):
            out = out.data
        return np.asarray(out, dtype=np.float64).reshape(-1)
    return evaluate


def grid_axis(resolution: int, bound: float = 1.0) -> np.ndarray:
    return np.linspace(-bound, bound, resolution)


def evaluate_grid(fn: Callable[[np.ndarray], np.ndarray], resolution: int, bound: float = 1.0,
                  chunk: int = 65536, workers: Optional[int] = 1, progress: bool = False) -> np.ndarray:
    """
    Values on the (res, res, res) lattice of [-bound, bound]^3, indexed [x, y, z].
    Slabs of constant x are evaluated in parallel.
    """
    axis = grid_axis(resolution, bound)
    yy, zz = np.meshgrid(axis, axis, indexing='ij')
    plane = np.stack([yy.reshape(-1), zz.reshape(-1)], axis=-1)

    def slab(i: int) -> np.ndarray:
        points = np.concatenate([np.full((len(plane), 1), axis[i]), plane], axis=1)
        values = np.concatenate([fn(points[s]) for s in chunk_slices(len(points), chunk)])
        return values.reshape(resolution, resolution)

    indices = tqdm(range(resolution), desc='grid', disable=not progress)
    return np.stack(map_ordered(slab, indices, workers), axis=0)


def marching_cubes(source, resolution: int = DEFAULT_RESOLUTION, iso: float = ISO_LEVEL,
                   bound: float = 1.0, workers: Optional[int] = 1, progress: bool = False) -> TriMesh:
    """
    Triangulate {alpha = iso} over [-bound, bound]^3.

    The grid is padded with empty cells so the surface always closes; vertex
    positions are interpolated linearly along the crossing edges. A field that
    never crosses the iso level yields an empty mesh.
    """
    if resolution < 8:
        raise ValueError(f"Marching-cubes resolution must be >= 8, got {resolution}")
    values = evaluate_grid(occupancy_function(source), resolution, bound, workers=workers, progress=progress)
    return mesh_from_grid(values, iso, bound)


def mesh_from_grid(values: np.ndarray, iso: float = ISO_LEVEL, bound: float = 1.0) -> TriMesh:
    """Polygonize a cubic [x, y, z] grid sampled on the lattice of [-bound, bound]^3"""
    resolution = values.shape[0]
    if values.shape != (resolution,) * 3:
        raise ValueError(f"Expected a cubic grid, got {values.shape}")
    if not np.any(values > iso):
        logger.info("Field never exceeds the iso level; returning an empty mesh")
        return TriMesh.empty()
    padded = np.pad(values, 1, mode='constant', constant_values=min(0.0, iso - 1.0))
    spacing = 2.0 * bound / (resolution - 1)
    vertices, faces, _, _ = measure.marching_cubes(padded, level=iso, spacing=(spacing,) * 3)
    vertices = vertices - spacing - bound
    mesh = TriMesh(vertices, faces).drop_degenerate()
    logger.info(f"Marching cubes: {mesh.n_vertices} vertices, {mesh.n_triangles} triangles")
    return mesh
