"""
Indexed triangle mesh with optional per-vertex colors
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

logger = logging.getLogger(__name__)

DEGENERATE_AREA = 1e-12


@dataclass(eq=False)
class TriMesh:
    """
    vertices (V, 3) world coordinates, triangles (F, 3) vertex indices,
    colors (V, 3) RGB in [0, 1] or None
    """
    vertices: np.ndarray
    triangles: np.ndarray
    colors: Optional[np.ndarray] = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if self.triangles.size and (self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)):
            raise ValueError(f"Triangle indices out of range for {len(self.vertices)} vertices")
        if self.colors is not None:
            self.colors = np.asarray(self.colors, dtype=np.float64).reshape(-1, 3)
            if len(self.colors) != len(self.vertices):
                raise ValueError(f"{len(self.colors)} colors for {len(self.vertices)} vertices")

    @classmethod
    def empty(cls) -> 'TriMesh':
        return cls(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def is_empty(self) -> bool:
        return self.n_triangles == 0

    def corners(self) -> np.ndarray:
        """(F, 3, 3) triangle corner positions"""
        return self.vertices[self.triangles]

    def triangle_areas(self) -> np.ndarray:
        a, b, c = np.moveaxis(self.corners(), 1, 0)
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=-1)

    def surface_area(self) -> float:
        return float(self.triangle_areas().sum())

    def edges(self) -> np.ndarray:
        """Unique undirected edges (E, 2)"""
        if self.is_empty:
            return np.zeros((0, 2), dtype=np.int64)
        pairs = np.concatenate([self.triangles[:, [0, 1]], self.triangles[:, [1, 2]], self.triangles[:, [2, 0]]])
        return np.unique(np.sort(pairs, axis=1), axis=0)

    def euler_characteristic(self) -> int:
        used = np.unique(self.triangles).size
        return int(used - len(self.edges()) + self.n_triangles)

    def is_watertight(self) -> bool:
        """Every undirected edge is shared by exactly two triangles"""
        if self.is_empty:
            return False
        pairs = np.concatenate([self.triangles[:, [0, 1]], self.triangles[:, [1, 2]], self.triangles[:, [2, 0]]])
        _, counts = np.unique(np.sort(pairs, axis=1), axis=0, return_counts=True)
        return bool(np.all(counts == 2))

    def drop_degenerate(self, tolerance: float = DEGENERATE_AREA) -> 'TriMesh':
        keep = self.triangle_areas() > tolerance
        if keep.all():
            return self
        logger.debug(f"Dropping {int((~keep).sum())} degenerate triangles")
        return TriMesh(self.vertices, self.triangles[keep], self.colors)

    def with_colors(self, colors: np.ndarray) -> 'TriMesh':
        return TriMesh(self.vertices, self.triangles, colors)

    def transformed(self, rotation: Optional[np.ndarray] = None, offset=None) -> 'TriMesh':
        """Rigid transform x -> R x + t"""
        vertices = self.vertices
        if rotation is not None:
            vertices = vertices @ np.asarray(rotation, dtype=np.float64).T
        if offset is not None:
            vertices = vertices + np.asarray(offset, dtype=np.float64)
        return TriMesh(vertices, self.triangles, self.colors)

    def sample_surface(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """`count` points distributed uniformly by area"""
        if self.is_empty:
            raise ValueError("Cannot sample the surface of an empty mesh")
        areas = self.triangle_areas()
        total = areas.sum()
        if total <= 0:
            raise ValueError("Mesh has zero surface area")
        chosen = rng.choice(self.n_triangles, size=count, p=areas / total)
        r1, r2 = rng.random(count), rng.random(count)
        flip = r1 + r2 > 1.0
        r1[flip], r2[flip] = 1.0 - r1[flip], 1.0 - r2[flip]
        a, b, c = np.moveaxis(self.corners()[chosen], 1, 0)
        return a + r1[:, None] * (b - a) + r2[:, None] * (c - a)

    def get_mesh_info(self) -> Dict:
        return {
            'vertices': self.n_vertices,
            'triangles': self.n_triangles,
            'colored': self.colors is not None,
            'surface_area': self.surface_area() if not self.is_empty else 0.0,
        }
