"""
Refinement generator

The coarse backside render is encoded down to the lowest scale and decoded
back to full resolution by a stack of style blocks (two per scale, the first
of each new scale upsampling). The modulation conditions come from a feature
pyramid built on the source features warped into the target view plus the
foreground mask.
"""

from __future__ import annotations

import logging
from typing import List, Optional, Sequence

import numpy as np

from ..diffcore import ops
from ..diffcore.nn import Conv, Layer
from ..diffcore.tensor import ShapeError, Tensor, as_tensor
from ..renderer.warp import WarpField
from .encoder import SourceEncoder, as_batch
from .style_block import StyleBlock
from .warping import warp_features

logger = logging.getLogger(__name__)

# pyramid channels, lowest resolution first
DESK_CHANNELS = (32, 32, 64, 64)


def resize_mask(mask: np.ndarray, height: int, width: int) -> np.ndarray:
    """Box-filter a (H, W) mask down to (height, width); H, W must be multiples"""
    mask = np.asarray(mask, dtype=np.float64)
    fy, fx = mask.shape[0] // height, mask.shape[1] // width
    if fy * height != mask.shape[0] or fx * width != mask.shape[1]:
        raise ShapeError(f"Cannot box-resize mask {mask.shape} to {(height, width)}")
    return mask.reshape(height, fy, width, fx).mean(axis=(1, 3))


class FeaturePyramid(Layer):
    """
    Top-down merge of warped features.

    Each level concatenates its warped features with the resized mask and
    projects them with a 1x1 conv; coarser levels are upsampled, passed
    through a 3x3 conv and added on the way up. Levels are ordered highest
    resolution first.
    """

    def __init__(self, feature_channels: Sequence[int], out_channels: Sequence[int], rng: np.random.Generator):
        super().__init__()
        if len(feature_channels) != len(out_channels):
            raise ValueError(f"Pyramid levels differ: {feature_channels} vs {out_channels}")
        self.out_channels = tuple(out_channels)
        self.laterals = []
        self.merges = []
        for i, (c_in, c_out) in enumerate(zip(feature_channels, out_channels)):
            self.laterals.append(self.add_child(f"lateral{i}", Conv(c_in + 1, c_out, 1, rng, padding=0)))
        for i in range(len(out_channels) - 1):
            self.merges.append(self.add_child(f"merge{i}", Conv(out_channels[i + 1], out_channels[i], 3, rng)))

    def forward(self, warped: Sequence[Tensor], mask: np.ndarray) -> List[Tensor]:
        if len(warped) != len(self.laterals):
            raise ShapeError(f"FeaturePyramid expects {len(self.laterals)} levels, got {len(warped)}")
        levels: List[Optional[Tensor]] = [None] * len(warped)
        for i in reversed(range(len(warped))):
            features = as_batch(warped[i])
            small_mask = resize_mask(mask, *features.shape[2:])[None, None]
            level = self.laterals[i](ops.concat([features, small_mask], axis=1))
            if i + 1 < len(warped):
                level = ops.add(level, self.merges[i](ops.upsample_nearest(levels[i + 1], 2)))
            levels[i] = level
        return levels


class RefineGenerator(Layer):
    """
    Args:
        channels: pyramid channels, lowest resolution first
        slope: leaky-rectifier slope applied after every style block
    """

    def __init__(self, rng: np.random.Generator, channels: Sequence[int] = DESK_CHANNELS, slope: float = 0.2):
        super().__init__()
        if len(channels) < 1:
            raise ValueError("RefineGenerator needs at least one scale")
        self.channels = tuple(int(c) for c in channels)
        self.slope = slope
        plan = self.channels[::-1]  # highest resolution first
        self.source_encoder = SourceEncoder(rng, plan)
        self.coarse_encoder = SourceEncoder(rng, plan)
        self.pyramid = FeaturePyramid(plan, plan, rng)

        # (block, index of the pyramid level conditioning it)
        self.schedule = []
        lowest = len(plan) - 1
        previous = plan[lowest]
        for level in range(lowest, -1, -1):
            width = plan[level]
            if level == lowest:
                first = StyleBlock(previous, width, plan[level], rng)
                first_level = level
            else:
                first = StyleBlock(previous, width, plan[level + 1], rng, upsample=True)
                first_level = level + 1
            second = StyleBlock(width, width, plan[level], rng)
            index = len(self.schedule)
            self.schedule.append((self.add_child(f"style{index}", first), first_level))
            self.schedule.append((self.add_child(f"style{index + 1}", second), level))
            previous = width
        self.to_rgb = Conv(plan[0], 3, 1, rng, padding=0)

    @property
    def scales(self) -> int:
        return len(self.channels)

    def conditions(self, source, warp: WarpField, mask: np.ndarray) -> List[Tensor]:
        warped = [warp_features(f, warp) for f in self.source_encoder(source)]
        return self.pyramid(warped, mask)

    def forward(self, coarse, source, warp: WarpField, mask: np.ndarray,
                rng: Optional[np.random.Generator] = None) -> Tensor:
        coarse, source = as_tensor(coarse), as_tensor(source)
        mask = np.asarray(mask, dtype=np.float64)
        if coarse.ndim != 3 or coarse.shape[0] != 3:
            raise ShapeError(f"Coarse image must be (3, H, W), got {coarse.shape}")
        size = coarse.shape[1:]
        if source.shape != coarse.shape:
            raise ShapeError(f"Source image {source.shape} does not match coarse image {coarse.shape}")
        if (warp.height, warp.width) != size or mask.shape != size:
            raise ShapeError(f"Warp field {(warp.height, warp.width)} / mask {mask.shape} "
                             f"do not match image size {size}")

        conditions = self.conditions(source, warp, mask)
        x = self.coarse_encoder(coarse)[-1]
        for block, level in self.schedule:
            x = ops.leaky_relu(block(x, conditions[level], rng), self.slope)
        rgb = ops.sigmoid(self.to_rgb(x))
        return ops.reshape(rgb, rgb.shape[1:])


def refine_forward(generator: RefineGenerator, coarse, source, warp: WarpField, mask: np.ndarray,
                   noise_rng: Optional[np.random.Generator] = None) -> Tensor:
    """Refined (3, H, W) backside image; zero noise when `noise_rng` is None"""
    return generator(coarse, source, warp, mask, noise_rng)
