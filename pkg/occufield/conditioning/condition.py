"""
Per-point condition vector C(p)

Initial mode:  [F_I(project(p)), F_V(p)]
Fusion mode:   [F_I(project(p)), F_V(p), F_back(project_back(p))]
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..diffcore import ops
from ..diffcore.tensor import ShapeError, Tensor
from .camera import Camera
from .proxy import cube_to_grid_coords
from .sampling import FeatureMap2D, FeatureVolume3D, sample_bilinear, sample_trilinear


def build_condition(points: np.ndarray, image_features: FeatureMap2D, volume_features: FeatureVolume3D,
                    camera: Camera, back_features: Optional[FeatureMap2D] = None,
                    back_camera: Optional[Camera] = None, fusion: bool = False) -> Tensor:
    """Condition vectors (N, C_img + C_vol [+ C_img]) for world points (N, 3)"""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if points.shape[1] != 3:
        raise ShapeError(f"build_condition expects (N, 3) points, got {points.shape}")
    if fusion and (back_features is None or back_camera is None):
        raise ValueError("Fusion-mode condition requires backside features and camera")

    uv, _ = camera.project(points)
    parts = [sample_bilinear(image_features, uv)]
    res = volume_features.data.shape[-1]
    parts.append(sample_trilinear(volume_features, cube_to_grid_coords(points, res)))
    if fusion:
        back_uv, _ = back_camera.project(points)
        parts.append(sample_bilinear(back_features, back_uv))
    return ops.concat(parts, axis=1)


def condition_size(image_channels: int, volume_channels: int, fusion: bool = False) -> int:
    return image_channels * (2 if fusion else 1) + volume_channels
