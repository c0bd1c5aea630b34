"""
Residual source-image encoder producing the multi-scale feature pyramid
"""

from __future__ import annotations

import logging
from typing import List, Sequence

import numpy as np

from ..diffcore import ops
from ..diffcore.nn import Conv, Layer
from ..diffcore.tensor import ShapeError, Tensor, as_tensor

logger = logging.getLogger(__name__)


def as_batch(image) -> Tensor:
    """(C, H, W) image -> (1, C, H, W) tensor; batched input passes through"""
    image = as_tensor(image)
    if image.ndim == 3:
        return ops.reshape(image, (1,) + image.shape)
    if image.ndim != 4 or image.shape[0] != 1:
        raise ShapeError(f"Expected a (C, H, W) image, got {image.shape}")
    return image


class ResidualBlock(Layer):
    """
    leaky(conv3x3(leaky(conv3x3(x))) + skip(x))

    The skip path is a strided 1x1 conv whenever the block changes the
    channel count or the resolution, identity otherwise.
    """

    def __init__(self, in_channels: int, out_channels: int, rng: np.random.Generator,
                 stride: int = 1, slope: float = 0.2):
        super().__init__()
        self.slope = slope
        self.conv1 = Conv(in_channels, out_channels, 3, rng, stride=stride)
        self.conv2 = Conv(out_channels, out_channels, 3, rng)
        self.skip = None
        if in_channels != out_channels or stride != 1:
            self.skip = Conv(in_channels, out_channels, 1, rng, stride=stride, padding=0)

    def forward(self, x: Tensor) -> Tensor:
        y = ops.leaky_relu(self.conv1(x), self.slope)
        y = self.conv2(y)
        shortcut = x if self.skip is None else self.skip(x)
        return ops.leaky_relu(ops.add(y, shortcut), self.slope)


class SourceEncoder(Layer):
    """
    Stem conv followed by one residual block per scale. Scale 0 keeps the
    input resolution; every later scale halves it.

    Args:
        channels: feature channels per scale, highest resolution first
    """

    def __init__(self, rng: np.random.Generator, channels: Sequence[int] = (64, 64, 32, 32),
                 in_channels: int = 3, slope: float = 0.2):
        super().__init__()
        if not channels or any(c < 1 for c in channels):
            raise ValueError(f"Invalid encoder channel plan: {channels}")
        self.channels = tuple(int(c) for c in channels)
        self.stem = Conv(in_channels, self.channels[0], 3, rng)
        self.blocks = []
        previous = self.channels[0]
        for i, width in enumerate(self.channels):
            block = ResidualBlock(previous, width, rng, stride=1 if i == 0 else 2, slope=slope)
            self.blocks.append(self.add_child(f"block{i}", block))
            previous = width

    @property
    def scales(self) -> int:
        return len(self.channels)

    @property
    def total_stride(self) -> int:
        return 2 ** (self.scales - 1)

    def forward(self, image) -> List[Tensor]:
        x = as_batch(image)
        height, width = x.shape[2:]
        if height % self.total_stride or width % self.total_stride:
            raise ShapeError(f"Image {height}x{width} is not divisible by {self.total_stride} "
                             f"({self.scales} scales)")
        x = self.stem(x)
        features = []
        for block in self.blocks:
            x = block(x)
            features.append(x)
        return features


def encode_source(image, encoder: SourceEncoder) -> List[Tensor]:
    """Multi-scale features (1, C_i, H / 2^i, W / 2^i), highest resolution first"""
    return encoder(image)
