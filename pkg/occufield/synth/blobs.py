"""
Seeded blob scenes: a striped sphere overlapping a checkered box

Every part is at least 0.4 cube units thick, so a 24-sample coarse pass
never steps over it. Used to compare hierarchical and dense rendering.
"""

import logging

import numpy as np

from ..diffcore.rng import make_stream
from .primitives import Box, Sphere
from .scene import AnalyticScene
from .textures import Texture

logger = logging.getLogger(__name__)


def blob_scene(seed: int) -> AnalyticScene:
    rng = make_stream(seed, 'blob_scene')

    def colors():
        return rng.uniform(0.1, 0.9, 3), rng.uniform(0.1, 0.9, 3)

    sphere_texture = Texture(kind='stripes', colors=colors(), frequency=rng.uniform(6.0, 12.0),
                             phase=rng.uniform(0.0, 2.0 * np.pi), axis=rng.normal(size=3))
    box_texture = Texture(kind='checker', colors=colors(), frequency=rng.uniform(6.0, 12.0),
                          phase=rng.uniform(0.0, 2.0 * np.pi))
    sphere = Sphere(rng.uniform(-0.3, 0.3, 3), rng.uniform(0.3, 0.45), texture=sphere_texture)
    box = Box(rng.uniform(-0.25, 0.25, 3), rng.uniform(0.2, 0.35, 3), texture=box_texture)
    logger.debug(f"blob_scene(seed={seed}): sphere r={sphere.radius:.3f}, box {box.half_sizes}")
    return AnalyticScene([sphere, box], seed=seed)
