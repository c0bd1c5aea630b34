"""
Exact ground-truth rendering of analytic scenes (closest hit, flat shading)
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..conditioning.camera import Camera
from ..renderer.rays import gen_rays
from .scene import AnalyticScene


@dataclass(eq=False)
class GroundTruthView:
    image: np.ndarray   # (H, W, 3)
    mask: np.ndarray    # (H, W) bool
    depth: np.ndarray   # (H, W) depth along the ray from the cube entry, inf on miss
    points: np.ndarray  # (H, W, 3) world hit points, nan on miss


def render_gt_view(scene: AnalyticScene, camera: Camera) -> GroundTruthView:
    rays = gen_rays(camera)
    depth, _ = scene.intersect(rays.origins, rays.directions)
    hit = np.isfinite(depth) & rays.valid
    points = np.full((len(rays), 3), np.nan)
    points[hit] = rays.origins[hit] + depth[hit][:, None] * rays.directions[hit]
    colors = np.zeros((len(rays), 3))
    if np.any(hit):
        colors[hit] = scene.color(points[hit])
    shape = (camera.height, camera.width)
    return GroundTruthView(image=colors.reshape(shape + (3,)), mask=hit.reshape(shape),
                           depth=np.where(hit, depth, np.inf).reshape(shape),
                           points=points.reshape(shape + (3,)))


def render_gt(scene: AnalyticScene, camera: Camera) -> Tuple[np.ndarray, np.ndarray]:
    """RGB image (H, W, 3) and foreground mask (H, W)"""
    view = render_gt_view(scene, camera)
    return view.image, view.mask
