"""
Conditional discriminator for GAN-mode refinement

Sees the (real or refined) backside image stacked with the coarse render.
Layout: 1x1 conv, then residual down-stages (3x3 conv, strided 3x3 conv,
strided 1x1 skip), a 3x3 conv, global average pooling and two linear layers.
"""

from __future__ import annotations

import logging
from typing import Sequence

import numpy as np

from ..diffcore import ops
from ..diffcore.nn import Conv, Layer, Linear
from ..diffcore.tensor import ShapeError, Tensor, as_tensor
from .encoder import as_batch

logger = logging.getLogger(__name__)

DESK_DISCRIMINATOR_CHANNELS = (16, 32, 64, 64)


class DownBlock(Layer):
    """(leaky(conv_s2(leaky(conv(x)))) + skip_s2(x)) / sqrt(2)"""

    def __init__(self, in_channels: int, out_channels: int, rng: np.random.Generator, slope: float = 0.2):
        super().__init__()
        self.slope = slope
        self.conv = Conv(in_channels, in_channels, 3, rng)
        self.down = Conv(in_channels, out_channels, 3, rng, stride=2)
        self.skip = Conv(in_channels, out_channels, 1, rng, stride=2, padding=0)

    def forward(self, x: Tensor) -> Tensor:
        y = ops.leaky_relu(self.conv(x), self.slope)
        y = ops.leaky_relu(self.down(y), self.slope)
        return ops.mul(ops.add(y, self.skip(x)), 1.0 / np.sqrt(2.0))


class Discriminator(Layer):
    """
    Args:
        channels: stem width followed by the output width of every down-stage
    """

    def __init__(self, rng: np.random.Generator, channels: Sequence[int] = DESK_DISCRIMINATOR_CHANNELS,
                 image_channels: int = 3, slope: float = 0.2):
        super().__init__()
        if len(channels) < 2:
            raise ValueError(f"Discriminator needs a stem and at least one stage, got {channels}")
        self.image_channels = image_channels
        self.slope = slope
        self.stem = Conv(2 * image_channels, channels[0], 1, rng, padding=0)
        self.stages = []
        for i in range(1, len(channels)):
            self.stages.append(self.add_child(f"down{i - 1}", DownBlock(channels[i - 1], channels[i], rng, slope)))
        self.final_conv = Conv(channels[-1], channels[-1], 3, rng)
        self.hidden = Linear(channels[-1], channels[-1], rng)
        self.logit = Linear(channels[-1], 1, rng)

    @property
    def total_stride(self) -> int:
        return 2 ** len(self.stages)

    def forward(self, image, coarse) -> Tensor:
        """Logit of shape (1,) for one image conditioned on its coarse render"""
        image, coarse = as_batch(image), as_batch(as_tensor(coarse))
        if image.shape != coarse.shape or image.shape[1] != self.image_channels:
            raise ShapeError(f"Discriminator inputs {image.shape} and {coarse.shape} must both be "
                             f"(1, {self.image_channels}, H, W)")
        if image.shape[2] % self.total_stride or image.shape[3] % self.total_stride:
            raise ShapeError(f"Image size {image.shape[2:]} is not divisible by {self.total_stride}")
        x = ops.leaky_relu(self.stem(ops.concat([image, coarse], axis=1)), self.slope)
        for stage in self.stages:
            x = stage(x)
        x = ops.leaky_relu(self.final_conv(x), self.slope)
        pooled = ops.mean(x, axis=(2, 3))
        hidden = ops.leaky_relu(self.hidden(pooled), self.slope)
        return ops.reshape(self.logit(hidden), (1,))
