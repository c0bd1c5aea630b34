"""
Feature grids and differentiable bilinear / trilinear sampling
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from ..diffcore import ops
from ..diffcore.tensor import ShapeError, Tensor, as_tensor


@dataclass(eq=False)
class FeatureMap2D:
    """(C, H, W) feature map addressed in normalized [-1, 1]^2"""
    data: Tensor

    def __post_init__(self):
        self.data = as_tensor(self.data)
        if self.data.ndim != 3:
            raise ShapeError(f"FeatureMap2D expects (C, H, W), got {self.data.shape}")

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


@dataclass(eq=False)
class FeatureVolume3D:
    """(C, D, H, W) feature volume over the bounding cube, axes (z, y, x)"""
    data: Tensor

    def __post_init__(self):
        self.data = as_tensor(self.data)
        if self.data.ndim != 4:
            raise ShapeError(f"FeatureVolume3D expects (C, D, H, W), got {self.data.shape}")

    @property
    def channels(self) -> int:
        return self.data.shape[0]


def sample_bilinear(features: Union[FeatureMap2D, Tensor, np.ndarray],
                    uv: Union[Tensor, np.ndarray]) -> Tensor:
    """Bilinear samples (N, C) at uv (N, 2); border-clamped outside [-1, 1]"""
    grid = features.data if isinstance(features, FeatureMap2D) else as_tensor(features)
    if grid.ndim != 3:
        raise ShapeError(f"sample_bilinear expects a (C, H, W) map, got {grid.shape}")
    return ops.grid_sample(grid, uv)


def sample_trilinear(volume: Union[FeatureVolume3D, Tensor, np.ndarray],
                     points: Union[Tensor, np.ndarray]) -> Tensor:
    """Trilinear samples (N, C) at normalized (x, y, z) points (N, 3)"""
    grid = volume.data if isinstance(volume, FeatureVolume3D) else as_tensor(volume)
    if grid.ndim != 4:
        raise ShapeError(f"sample_trilinear expects a (C, D, H, W) volume, got {grid.shape}")
    return ops.grid_sample(grid, points)


def sample_image(image: np.ndarray, uv: np.ndarray) -> np.ndarray:
    """Bilinear RGB lookup in an (H, W, 3) image; constant, no graph"""
    grid = np.moveaxis(np.asarray(image, dtype=np.float64), -1, 0)
    return ops.grid_sample(Tensor(grid), uv).data
