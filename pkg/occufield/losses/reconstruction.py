"""
Field training objectives: per-point reconstruction and volume rendering
"""

from __future__ import annotations

from ..diffcore import ops
from ..diffcore.tensor import ShapeError, Tensor, as_tensor
from .points import PointSampleSet


def _mae(pred, target) -> Tensor:
    return ops.mean(ops.absolute(ops.sub(pred, target)))


def loss_recon(alpha, color, final_color, targets: PointSampleSet) -> Tensor:
    """
    mean (alpha - alpha*)^2 over occupancy points
    + mean |c - c*| + mean |c' - c*| over color points and RGB channels
    """
    alpha, color, final_color = as_tensor(alpha), as_tensor(color), as_tensor(final_color)
    if alpha.shape != targets.occupancy.shape:
        raise ShapeError(f"loss_recon: alpha {alpha.shape} vs {targets.occupancy.shape} targets")
    if color.shape != targets.colors.shape or final_color.shape != targets.colors.shape:
        raise ShapeError(f"loss_recon: colors {color.shape}/{final_color.shape} vs {targets.colors.shape} targets")
    occupancy_term = ops.mean(ops.power(ops.sub(alpha, targets.occupancy), 2.0))
    return ops.add(occupancy_term, ops.add(_mae(color, targets.colors), _mae(final_color, targets.colors)))


def loss_vol(rendered_color, rendered_final, target_colors) -> Tensor:
    """mean |c_r - c*_r| + mean |c'_r - c*_r| over rays and channels"""
    rendered_color, rendered_final = as_tensor(rendered_color), as_tensor(rendered_final)
    target = as_tensor(target_colors)
    if rendered_color.shape != target.shape or rendered_final.shape != target.shape:
        raise ShapeError(f"loss_vol: renders {rendered_color.shape}/{rendered_final.shape} vs targets {target.shape}")
    return ops.add(_mae(rendered_color, target), _mae(rendered_final, target))
