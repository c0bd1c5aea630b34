"""
Skip-connected MLP for the implicit field G(p, C(p)) -> (alpha, color, gamma)

Head layout: [color(3), alpha(1), gamma(1)] in the initial stage and
[color(3), alpha(1), gamma-logits(3)] in the fusion stage.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..diffcore import ops
from ..diffcore.nn import Layer, Linear
from ..diffcore.tensor import ShapeError, Tensor, as_tensor
from .encoding import encoded_size, positional_encode

logger = logging.getLogger(__name__)

DESK_WIDTHS = (128, 128, 64, 64)

INITIAL_HEAD = 5
FUSION_HEAD = 7


@dataclass(eq=False)
class FieldOutput:
    """Batched field values; alpha (N,), color (N, 3), gamma (N,) or (N, 3)"""
    alpha: Tensor
    color: Tensor
    gamma: Tensor

    def __len__(self) -> int:
        return self.alpha.shape[0]


class FieldNetwork(Layer):
    """
    MLP over [positional_encode(p), C(p)].

    The network input is re-concatenated before every hidden layer after the
    first; the head reads the last hidden layer.
    """

    def __init__(self, condition_size: int, rng: np.random.Generator,
                 widths: Sequence[int] = DESK_WIDTHS, frequencies: int = 6,
                 fusion: bool = False, slope: float = 0.2, zero_head: bool = False):
        super().__init__()
        widths = [int(w) for w in widths]
        if not widths or any(w < 1 for w in widths):
            raise ValueError(f"Field widths must be positive, got {widths}")
        if condition_size < 0:
            raise ValueError(f"condition_size must be >= 0, got {condition_size}")
        self.frequencies = frequencies
        self.condition_size = condition_size
        self.fusion = fusion
        self.slope = slope
        self.widths = widths
        self.input_size = encoded_size(frequencies) + condition_size
        self.head_size = FUSION_HEAD if fusion else INITIAL_HEAD

        self.hidden = []
        previous = 0
        for i, width in enumerate(widths):
            layer = Linear(previous + self.input_size, width, rng)
            self.hidden.append(self.add_child(f"fc{i}", layer))
            previous = width
        self.head = Linear(previous, self.head_size, rng, zero_init=zero_head)

    def forward(self, points: np.ndarray, conditions: Tensor) -> FieldOutput:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        conditions = as_tensor(conditions)
        if conditions.ndim != 2 or conditions.shape[0] != points.shape[0]:
            raise ShapeError(f"field_eval: {points.shape[0]} points but conditions of shape {conditions.shape}")
        if conditions.shape[1] != self.condition_size:
            raise ShapeError(f"field_eval: expected {self.condition_size} condition channels, "
                             f"got {conditions.shape[1]}")
        self.check_finite()

        inputs = ops.concat([Tensor(positional_encode(points, self.frequencies)), conditions], axis=1)
        x = inputs
        for i, layer in enumerate(self.hidden):
            x = ops.leaky_relu(layer(x if i == 0 else ops.concat([x, inputs], axis=1)), self.slope)
        out = self.head(x)

        color = ops.sigmoid(out[:, 0:3])
        alpha = ops.sigmoid(out[:, 3])
        if self.fusion:
            gamma = ops.softmax(out[:, 4:7], axis=1)
        else:
            gamma = ops.sigmoid(out[:, 4])
        return FieldOutput(alpha=alpha, color=color, gamma=gamma)


def field_eval(network: FieldNetwork, points: np.ndarray, conditions: Tensor) -> FieldOutput:
    return network(points, conditions)
