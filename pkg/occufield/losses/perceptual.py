"""
Multi-scale feature loss with a frozen random conv pyramid as extractor
"""

from __future__ import annotations

import logging
from typing import Callable, List, Sequence

import numpy as np

from ..diffcore import ops
from ..diffcore.nn import Conv, Layer
from ..diffcore.tensor import ShapeError, Tensor, as_tensor
from .refinement import apply_mask

logger = logging.getLogger(__name__)

PERCEPTUAL_WEIGHTS = (1.0 / 32.0, 1.0 / 16.0, 1.0 / 8.0, 1.0 / 4.0, 1.0)


class PerceptualExtractor(Layer):
    """
    Frozen, seeded conv pyramid: the first scale keeps full resolution and
    every later scale halves it. Returns one feature map per scale.
    """

    def __init__(self, rng: np.random.Generator, scales: int = 5, channels: int = 8,
                 in_channels: int = 3, slope: float = 0.2):
        super().__init__()
        if scales < 1:
            raise ValueError(f"Extractor needs at least one scale, got {scales}")
        self.slope = slope
        self.stages = []
        previous = in_channels
        for i in range(scales):
            conv = Conv(previous, channels, 3, rng, stride=1 if i == 0 else 2, trainable=False)
            self.stages.append(self.add_child(f"scale{i}", conv))
            previous = channels

    @property
    def scales(self) -> int:
        return len(self.stages)

    def forward(self, image) -> List[Tensor]:
        image = as_tensor(image)
        if image.ndim != 3:
            raise ShapeError(f"Extractor expects a (C, H, W) image, got {image.shape}")
        x = ops.reshape(image, (1,) + image.shape)
        features = []
        for conv in self.stages:
            x = ops.leaky_relu(conv(x), self.slope)
            features.append(x)
        return features


def loss_perceptual(refined, target, mask, extractor: Callable[[Tensor], Sequence[Tensor]],
                    weights: Sequence[float] = PERCEPTUAL_WEIGHTS) -> Tensor:
    """sum_i w_i * mean |phi_i(refined * M) - phi_i(target * M)|"""
    refined_features = extractor(apply_mask(refined, mask))
    target_features = extractor(apply_mask(target, mask))
    if len(refined_features) != len(weights) or len(target_features) != len(weights):
        raise ValueError(f"Extractor produced {len(refined_features)} scales but {len(weights)} weights were given")
    total = None
    for weight, a, b in zip(weights, refined_features, target_features):
        term = ops.mul(float(weight), ops.mean(ops.absolute(ops.sub(a, b))))
        total = term if total is None else ops.add(total, term)
    return total
