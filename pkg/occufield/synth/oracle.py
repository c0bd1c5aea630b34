"""
Renderer-compatible fields backed by an analytic scene

Used as ground truth for rendering checks and as a stand-in field for warp
fields when training the refiner from exact geometry.
"""

from __future__ import annotations

from typing import Callable, Dict, Optional, Tuple

import numpy as np

from ..diffcore.tensor import Tensor
from .scene import AnalyticScene


class AnalyticField:
    """
    field(points) -> (alpha, {'color': ..., 'final': ...}) from an analytic scene.

    With softness 0 alpha is the exact occupancy; a positive softness gives
    the smooth alpha = sigmoid(-sdf / softness).
    """

    def __init__(self, scene: AnalyticScene, softness: float = 0.0,
                 color_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None):
        if softness < 0:
            raise ValueError(f"softness must be >= 0, got {softness}")
        self.scene = scene
        self.softness = float(softness)
        self.color_fn = color_fn

    def alpha(self, points: np.ndarray) -> np.ndarray:
        if self.softness == 0.0:
            return self.scene.occupancy(points)
        sdf = self.scene.sdf(points)
        return 0.5 * (1.0 + np.tanh(-0.5 * sdf / self.softness))

    def __call__(self, points: np.ndarray) -> Tuple[Tensor, Dict[str, Tensor]]:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        colors = self.color_fn(points) if self.color_fn is not None else self.scene.color(points)
        return Tensor(self.alpha(points)), {'color': Tensor(colors), 'final': Tensor(colors)}


class EmptyField:
    """alpha = 0 everywhere"""

    def __call__(self, points: np.ndarray) -> Tuple[Tensor, Dict[str, Tensor]]:
        points = np.atleast_2d(points)
        zeros = np.zeros((points.shape[0], 3))
        return Tensor(np.zeros(points.shape[0])), {'color': Tensor(zeros), 'final': Tensor(zeros)}
