"""
Gamma compositing of predicted and image-sampled colors
"""

from __future__ import annotations

import numpy as np

from ..diffcore import ops
from ..diffcore.tensor import ShapeError, Tensor, as_tensor


def composite_color_initial(gamma, pred_color, source_sample) -> Tensor:
    """c' = gamma * source + (1 - gamma) * pred; gamma (N,), colors (N, 3)"""
    gamma = as_tensor(gamma)
    g = ops.reshape(gamma, gamma.shape + (1,))
    return ops.add(ops.mul(g, source_sample), ops.mul(ops.sub(1.0, g), pred_color))


def composite_color_fusion(gamma3, pred_color, source_sample, backside_sample) -> Tensor:
    """c' = g1 * source + g2 * backside + g3 * pred; gamma3 (N, 3) on the simplex"""
    gamma3 = as_tensor(gamma3)
    if gamma3.ndim != 2 or gamma3.shape[1] != 3:
        raise ShapeError(f"Fusion gamma must be (N, 3), got {gamma3.shape}")
    g1, g2, g3 = (gamma3[:, k:k + 1] for k in range(3))
    return ops.add(ops.add(ops.mul(g1, source_sample), ops.mul(g2, backside_sample)),
                   ops.mul(g3, pred_color))


def gamma_visualization(gamma: np.ndarray) -> np.ndarray:
    """
    RGB coding of blend weights: red = predicted color share, green = source
    share, blue = backside share. A scalar initial-stage gamma maps to
    (1 - gamma, gamma, 0).
    """
    gamma = np.asarray(gamma, dtype=np.float64)
    if gamma.ndim == 1 or gamma.shape[-1] == 1:
        g = gamma.reshape(-1)
        return np.stack([1.0 - g, g, np.zeros_like(g)], axis=-1)
    return np.stack([gamma[..., 2], gamma[..., 0], gamma[..., 1]], axis=-1)
