"""
Spatially modulated style block

    F_hat     = alpha(cond) * F + beta(cond)        per location
    F_out     = conv3x3(F_hat)                      (optionally 2x upsampled first)
    F_bar     = (F_out - mean) / (std + 1e-8)       per channel over space
    output    = F_bar + b + noise_strength * n
"""

from __future__ import annotations

import logging
from typing import Optional

import numpy as np

from ..diffcore import ops
from ..diffcore.nn import Conv, Layer
from ..diffcore.tensor import ShapeError, Tensor, as_tensor

logger = logging.getLogger(__name__)

STD_EPSILON = 1e-8


def standardize(x, epsilon: float = STD_EPSILON) -> Tensor:
    """Zero mean, unit standard deviation per channel of a (1, C, H, W) map"""
    x = as_tensor(x)
    centered = ops.sub(x, ops.mean(x, axis=(2, 3), keepdims=True))
    std = ops.sqrt(ops.var(x, axis=(2, 3), keepdims=True))
    return ops.div(centered, ops.add(std, epsilon))


class StyleBlock(Layer):
    """
    Args:
        in_channels: channels of the incoming feature map (and of alpha/beta)
        out_channels: channels produced by the 3x3 conv
        cond_channels: channels of the condition map, at the input resolution
        upsample: double the resolution between modulation and convolution
    """

    def __init__(self, in_channels: int, out_channels: int, cond_channels: int,
                 rng: np.random.Generator, upsample: bool = False):
        super().__init__()
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.cond_channels = cond_channels
        self.upsample = upsample
        self.to_alpha = Conv(cond_channels, in_channels, 1, rng, padding=0, bias_init=1.0)
        self.to_beta = Conv(cond_channels, in_channels, 1, rng, padding=0)
        self.conv = Conv(in_channels, out_channels, 3, rng)
        self.bias = Tensor(np.zeros(out_channels), requires_grad=True)
        self.noise_strength = Tensor(np.zeros(out_channels), requires_grad=True)

    def _check(self, features: Tensor, condition: Tensor) -> None:
        if features.ndim != 4 or features.shape[1] != self.in_channels:
            raise ShapeError(f"StyleBlock expects (1, {self.in_channels}, H, W) features, got {features.shape}")
        if condition.ndim != 4 or condition.shape[1] != self.cond_channels:
            raise ShapeError(f"StyleBlock expects {self.cond_channels} condition channels, got {condition.shape}")
        if condition.shape[2:] != features.shape[2:]:
            raise ShapeError(f"Condition {condition.shape[2:]} and features {features.shape[2:]} differ in size")

    def modulate(self, features, condition) -> Tensor:
        """conv3x3(alpha * F + beta), before standardization"""
        features, condition = as_tensor(features), as_tensor(condition)
        self._check(features, condition)
        modulated = ops.add(ops.mul(self.to_alpha(condition), features), self.to_beta(condition))
        if self.upsample:
            modulated = ops.upsample_nearest(modulated, 2)
        return self.conv(modulated)

    def forward(self, features, condition, rng: Optional[np.random.Generator] = None) -> Tensor:
        out = standardize(self.modulate(features, condition))
        out = ops.add(out, ops.reshape(self.bias, (1, -1, 1, 1)))
        if rng is not None:
            noise = rng.normal(size=(1, 1) + out.shape[2:])
            out = ops.add(out, ops.mul(ops.reshape(self.noise_strength, (1, -1, 1, 1)), noise))
        return out


def style_block(features, condition, block: StyleBlock, noise_rng: Optional[np.random.Generator] = None) -> Tensor:
    return block(features, condition, noise_rng)
