"""
Shallow convolutional encoders for the image and the proxy volume
"""

from __future__ import annotations

import logging
from typing import Sequence, Union

import numpy as np

from ..diffcore import ops
from ..diffcore.nn import Conv, Layer
from ..diffcore.tensor import ShapeError, Tensor, as_tensor
from .proxy import ProxyVolume
from .sampling import FeatureMap2D, FeatureVolume3D

logger = logging.getLogger(__name__)


class _ConvStack(Layer):
    """Conv + leaky rectifier after every layer but the last"""

    def __init__(self, in_channels: int, channels: Sequence[int], strides: Sequence[int],
                 rng: np.random.Generator, kernel: int = 3, dims: int = 2, slope: float = 0.2):
        super().__init__()
        channels, strides = list(channels), list(strides)
        if not channels:
            raise ValueError("Encoder needs at least one layer")
        if len(channels) != len(strides):
            raise ValueError(f"Encoder config mismatch: {len(channels)} channel counts "
                             f"for {len(strides)} strides")
        if any(s < 1 for s in strides) or any(c < 1 for c in channels):
            raise ValueError(f"Encoder channels/strides must be positive: {channels}, {strides}")
        self.slope = slope
        self.total_stride = int(np.prod(strides))
        self.out_channels = channels[-1]
        self.layers = []
        previous = in_channels
        for i, (width, stride) in enumerate(zip(channels, strides)):
            layer = Conv(previous, width, kernel, rng, stride=stride, dims=dims)
            self.layers.append(self.add_child(f"conv{i}", layer))
            previous = width

    def forward(self, x: Tensor) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = ops.leaky_relu(x, self.slope)
        return x


class ImageEncoder(_ConvStack):
    """RGB image -> FeatureMap2D at 1/total_stride resolution"""

    def __init__(self, rng: np.random.Generator, channels: Sequence[int] = (16, 16, 16),
                 strides: Sequence[int] = (2, 2, 1), kernel: int = 3, slope: float = 0.2):
        super().__init__(3, channels, strides, rng, kernel=kernel, dims=2, slope=slope)

    def forward(self, image: Union[np.ndarray, Tensor]) -> FeatureMap2D:
        x = _image_tensor(image)
        height, width = x.shape[1:]
        if height % self.total_stride or width % self.total_stride:
            raise ShapeError(f"Image size {width}x{height} is not divisible by the "
                             f"encoder stride {self.total_stride}")
        out = super().forward(ops.reshape(x, (1,) + x.shape))
        return FeatureMap2D(ops.reshape(out, out.shape[1:]))


class VolumeEncoder(_ConvStack):
    """ProxyVolume -> FeatureVolume3D at grid resolution"""

    def __init__(self, rng: np.random.Generator, channels: Sequence[int] = (8, 8),
                 kernel: int = 3, slope: float = 0.2):
        super().__init__(1, channels, [1] * len(channels), rng, kernel=kernel, dims=3, slope=slope)

    def forward(self, volume: Union[ProxyVolume, np.ndarray, Tensor]) -> FeatureVolume3D:
        if isinstance(volume, ProxyVolume):
            volume = volume.grid.astype(np.float64)
        x = as_tensor(volume)
        if x.ndim != 3:
            raise ShapeError(f"VolumeEncoder expects a (D, H, W) grid, got {x.shape}")
        out = super().forward(ops.reshape(x, (1, 1) + x.shape))
        return FeatureVolume3D(ops.reshape(out, out.shape[1:]))


def _image_tensor(image: Union[np.ndarray, Tensor]) -> Tensor:
    """Accept (H, W, 3) arrays or (3, H, W) tensors"""
    if isinstance(image, Tensor):
        if image.ndim != 3 or image.shape[0] != 3:
            raise ShapeError(f"Image tensor must be (3, H, W), got {image.shape}")
        return image
    array = np.asarray(image, dtype=np.float64)
    if array.ndim != 3 or array.shape[-1] != 3:
        raise ShapeError(f"Image array must be (H, W, 3), got {array.shape}")
    return Tensor(np.ascontiguousarray(np.moveaxis(array, -1, 0)))


def encode_image(encoder: ImageEncoder, image) -> FeatureMap2D:
    return encoder(image)


def encode_volume(encoder: VolumeEncoder, proxy: ProxyVolume) -> FeatureVolume3D:
    return encoder(proxy)
