"""
Warping of source features into the target (backside) view
"""

from __future__ import annotations

from typing import Tuple

import numpy as np

from ..diffcore import ops
from ..diffcore.tensor import ShapeError, Tensor, as_tensor, no_grad
from ..renderer.warp import WarpField


def target_grid(height: int, width: int) -> np.ndarray:
    """Normalized (u, v) of every pixel of a height x width grid, row-major"""
    u = np.linspace(-1.0, 1.0, width) if width > 1 else np.zeros(1)
    v = np.linspace(-1.0, 1.0, height) if height > 1 else np.zeros(1)
    uu, vv = np.meshgrid(u, v)
    return np.stack([uu.reshape(-1), vv.reshape(-1)], axis=-1)


def resample_warp(warp: WarpField, height: int, width: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Warp field at another resolution.

    Coordinates are interpolated bilinearly from valid neighbours only, and a
    resampled pixel is valid when at least half of its interpolation weight
    falls on valid pixels.

    Returns:
        coords (height * width, 2) and valid (height * width,)
    """
    if (height, width) == (warp.height, warp.width):
        return warp.coords.reshape(-1, 2).copy(), warp.valid.reshape(-1).copy()
    weight = warp.valid.astype(np.float64)
    stacked = np.stack([warp.coords[..., 0] * weight, warp.coords[..., 1] * weight, weight])
    with no_grad():
        sampled = ops.grid_sample(stacked, target_grid(height, width)).data
    valid = sampled[:, 2] >= 0.5
    coords = np.zeros((height * width, 2))
    coords[valid] = sampled[valid, :2] / sampled[valid, 2:3]
    return coords, valid


def warp_features(features, warp: WarpField) -> Tensor:
    """
    F_trg(x) = F_src(f(x)) sampled bilinearly; zero where f is invalid.

    Accepts (C, h, w) or (1, C, h, w) features and returns the same rank.
    The result is linear in the features.
    """
    features = as_tensor(features)
    batched = features.ndim == 4
    if batched:
        if features.shape[0] != 1:
            raise ShapeError(f"warp_features handles a single image, got {features.shape}")
        features = ops.reshape(features, features.shape[1:])
    if features.ndim != 3:
        raise ShapeError(f"warp_features expects (C, h, w) features, got {features.shape}")
    channels, height, width = features.shape
    coords, valid = resample_warp(warp, height, width)
    sampled = ops.grid_sample(features, coords)
    sampled = ops.mul(sampled, valid.astype(np.float64)[:, None])
    warped = ops.reshape(ops.transpose(sampled, (1, 0)), (channels, height, width))
    if batched:
        warped = ops.reshape(warped, (1, channels, height, width))
    return warped
