"""
Image-space refinement objectives
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..diffcore import ops
from ..diffcore.tensor import ShapeError, Tensor, as_tensor
from ..utils.validators import validate_non_negative


def apply_mask(image, mask) -> Tensor:
    """image (C, H, W) times mask (H, W)"""
    image = as_tensor(image)
    mask = np.asarray(mask, dtype=np.float64)
    if image.ndim != 3 or mask.shape != image.shape[1:]:
        raise ShapeError(f"Mask {mask.shape} does not match image {image.shape}")
    return ops.mul(image, mask[None])


def loss_l1_masked(refined, target, mask) -> Tensor:
    """mean |refined * M - target * M| over all pixels and channels"""
    refined, target = as_tensor(refined), as_tensor(target)
    if refined.shape != target.shape:
        raise ShapeError(f"loss_l1_masked: refined {refined.shape} vs target {target.shape}")
    return ops.mean(ops.absolute(ops.sub(apply_mask(refined, mask), apply_mask(target, mask))))


def loss_refine_total(l1, perceptual, adversarial: Optional[Tensor] = None,
                      lambda_vgg: float = 1.0, lambda_l1: float = 1.0) -> Tensor:
    """L_adv + lambda_vgg * L_perceptual + lambda_l1 * L_l1; adversarial term optional"""
    lambda_vgg = validate_non_negative('lambda_vgg', lambda_vgg)
    lambda_l1 = validate_non_negative('lambda_l1', lambda_l1)
    total = ops.add(ops.mul(lambda_l1, as_tensor(l1)), ops.mul(lambda_vgg, as_tensor(perceptual)))
    if adversarial is not None:
        total = ops.add(total, adversarial)
    return total
