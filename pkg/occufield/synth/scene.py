"""
Union-of-primitives scenes with exact occupancy and color queries
"""

from __future__ import annotations

import logging
from typing import List, Sequence, Tuple

import numpy as np

from .primitives import Primitive

logger = logging.getLogger(__name__)

SCENE_BOUND = 0.9


class AnalyticScene:
    """
    Union of textured primitives inside [-0.9, 0.9]^3.

    Queries are pure functions of (scene, points). An empty scene is allowed
    (it renders black) but cannot be voxelized or sampled.
    """

    def __init__(self, primitives: Sequence[Primitive], seed: int = 0, check_bounds: bool = True):
        self.primitives: List[Primitive] = list(primitives)
        self.seed = int(seed)
        if check_bounds:
            for primitive in self.primitives:
                lo, hi = primitive.bounds()
                if np.any(lo < -SCENE_BOUND - 1e-12) or np.any(hi > SCENE_BOUND + 1e-12):
                    raise ValueError(f"{primitive.kind} at {primitive.center} leaves the scene bounds "
                                     f"[{-SCENE_BOUND}, {SCENE_BOUND}]^3: {lo} .. {hi}")

    def __len__(self) -> int:
        return len(self.primitives)

    @property
    def is_empty(self) -> bool:
        return not self.primitives

    def _distances(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return np.stack([p.sdf(points) for p in self.primitives], axis=1)

    def sdf(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if self.is_empty:
            return np.full(points.shape[0], np.inf)
        return self._distances(points).min(axis=1)

    def occupancy(self, points: np.ndarray) -> np.ndarray:
        """1 inside (boundary included), 0 outside"""
        return (self.sdf(points) <= 0.0).astype(np.float64)

    def nearest_primitive(self, points: np.ndarray) -> np.ndarray:
        return self._distances(points).argmin(axis=1)

    def color(self, points: np.ndarray) -> np.ndarray:
        """Texture color of the primitive whose surface is nearest (most interior wins)"""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        colors = np.zeros((points.shape[0], 3))
        if self.is_empty:
            return colors
        owner = self.nearest_primitive(points)
        for index, primitive in enumerate(self.primitives):
            selected = owner == index
            if np.any(selected):
                colors[selected] = primitive.color(points[selected])
        return colors

    def intersect(self, origins: np.ndarray, directions: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Closest hit depth (inf on miss) and primitive index (-1 on miss) per ray"""
        origins = np.atleast_2d(origins)
        if self.is_empty:
            return np.full(origins.shape[0], np.inf), np.full(origins.shape[0], -1)
        depths = np.stack([p.intersect(origins, directions) for p in self.primitives], axis=1)
        index = depths.argmin(axis=1)
        best = depths[np.arange(len(index)), index]
        return best, np.where(np.isfinite(best), index, -1)

    def sample_surface(self, count: int, rng: np.random.Generator, max_rounds: int = 50) -> np.ndarray:
        """Area-uniform points on the union's outer surface"""
        if self.is_empty:
            raise ValueError("Cannot sample the surface of an empty scene")
        areas = np.array([p.area() for p in self.primitives])
        collected, have = [], 0
        for _ in range(max_rounds):
            need = count - have
            if need <= 0:
                break
            batch = max(need * 2, 16)
            owner = rng.choice(len(self.primitives), size=batch, p=areas / areas.sum())
            points = np.empty((batch, 3))
            for index, primitive in enumerate(self.primitives):
                selected = owner == index
                if np.any(selected):
                    points[selected] = primitive.sample_surface(int(selected.sum()), rng)
            # drop points buried inside another primitive
            exposed = points[self.sdf(points) > -1e-9]
            collected.append(exposed[:need])
            have += len(collected[-1])
        if have < count:
            raise ValueError(f"Surface sampling produced only {have}/{count} exposed points")
        return np.concatenate(collected, axis=0)

    def get_scene_info(self) -> dict:
        return {
            'seed': self.seed,
            'primitives': [p.get_primitive_info() for p in self.primitives],
        }


def analytic_occupancy(scene: AnalyticScene, points: np.ndarray) -> np.ndarray:
    return scene.occupancy(points)


def analytic_color(scene: AnalyticScene, points: np.ndarray) -> np.ndarray:
    return scene.color(points)
