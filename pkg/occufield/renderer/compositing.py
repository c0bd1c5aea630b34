"""
Occupancy-based front-to-back compositing

c_r = sum_j alpha_j * prod_{k<j} (1 - alpha_k) * c_j
"""

from __future__ import annotations

from typing import Tuple

from ..diffcore import ops
from ..diffcore.tensor import ShapeError, Tensor, as_tensor


def transmittance(alphas) -> Tensor:
    """T (R, N + 1) with T[:, 0] = 1 and T[:, j + 1] = T[:, j] * (1 - alpha_j)"""
    return ops.cumprod_exclusive(ops.sub(1.0, as_tensor(alphas)))


def composite(alphas, payload) -> Tuple[Tensor, Tensor, Tensor]:
    """
    alphas (R, N) in [0, 1], payload (R, N, K).

    Returns the rendered (R, K) vectors, weights (R, N) and
    transmittances (R, N + 1). Samples must be sorted front to back.
    """
    alphas, payload = as_tensor(alphas), as_tensor(payload)
    if alphas.ndim != 2 or payload.ndim != 3 or payload.shape[:2] != alphas.shape:
        raise ShapeError(f"composite: alphas {alphas.shape} and payload {payload.shape} do not match")
    trans = transmittance(alphas)
    weights = ops.mul(alphas, trans[:, :-1])
    rendered = ops.reduce_sum(ops.mul(ops.reshape(weights, weights.shape + (1,)), payload), axis=1)
    return rendered, weights, trans
