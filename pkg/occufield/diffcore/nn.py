"""
Parameter containers and basic trainable layers
"""

from __future__ import annotations

import logging
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from . import ops
from .tensor import ShapeError, Tensor

logger = logging.getLogger(__name__)


class Layer:
    """
    Base class for trainable blocks.

    Tensor attributes with requires_grad=True and Layer attributes are
    registered automatically, in assignment order, so parameter names and
    iteration order are deterministic.
    """

    def __init__(self):
        object.__setattr__(self, '_params', {})
        object.__setattr__(self, '_children', {})

    def __setattr__(self, name, value):
        if isinstance(value, Tensor) and value.requires_grad:
            self._params[name] = value
        elif isinstance(value, Layer):
            self._children[name] = value
        object.__setattr__(self, name, value)

    def add_child(self, name: str, layer: 'Layer') -> 'Layer':
        """Register a child under an explicit name (used for layer lists)"""
        self._children[name] = layer
        return layer

    def named_parameters(self, prefix: str = '') -> Dict[str, Tensor]:
        named: Dict[str, Tensor] = {}
        for name, param in self._params.items():
            named[f"{prefix}{name}"] = param
        for name, child in self._children.items():
            named.update(child.named_parameters(f"{prefix}{name}/"))
        return named

    def parameters(self) -> List[Tensor]:
        return list(self.named_parameters().values())

    def zero_grad(self) -> None:
        for param in self.parameters():
            param.zero_grad()

    def state_dict(self, prefix: str = '') -> Dict[str, np.ndarray]:
        return {name: param.data.copy() for name, param in self.named_parameters(prefix).items()}

    def load_state_dict(self, state: Mapping[str, np.ndarray], prefix: str = '', strict: bool = True) -> None:
        named = self.named_parameters(prefix)
        missing = [name for name in named if name not in state]
        if missing and strict:
            raise ValueError(f"Missing parameters in state: {missing[:5]}{'...' if len(missing) > 5 else ''}")
        for name, param in named.items():
            if name not in state:
                continue
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != param.shape:
                raise ShapeError(f"Parameter {name}: stored shape {value.shape} != expected {param.shape}")
            param.data = value.copy()

    def check_finite(self) -> None:
        for name, param in self.named_parameters().items():
            if not np.all(np.isfinite(param.data)):
                raise ValueError(f"Parameter {name} contains non-finite values")

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


def _uniform(rng: np.random.Generator, fan_in: int, shape: Tuple[int, ...], gain: float = 1.0) -> np.ndarray:
    bound = gain * np.sqrt(6.0 / max(fan_in, 1)) / np.sqrt(2.0)
    return rng.uniform(-bound, bound, size=shape)


class Linear(Layer):
    """y = x @ W + b with W of shape (in, out)"""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator,
                 zero_init: bool = False, trainable: bool = True):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        weight = np.zeros((in_features, out_features)) if zero_init else _uniform(rng, in_features, (in_features, out_features))
        self.weight = Tensor(weight, requires_grad=trainable)
        self.bias = Tensor(np.zeros(out_features), requires_grad=trainable)

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.in_features:
            raise ShapeError(f"Linear expects {self.in_features} features, got shape {x.shape}")
        return ops.add(ops.matmul(x, self.weight), self.bias)


class Conv(Layer):
    """N-d convolution over (N, C, *S) inputs"""

    def __init__(self, in_channels: int, out_channels: int, kernel: int, rng: np.random.Generator,
                 stride: int = 1, padding: Optional[int] = None, dims: int = 2,
                 bias_init: float = 0.0, zero_init: bool = False, trainable: bool = True):
        super().__init__()
        if kernel < 1 or stride < 1:
            raise ValueError(f"Invalid conv geometry: kernel={kernel}, stride={stride}")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.stride = stride
        self.padding = kernel // 2 if padding is None else padding
        self.dims = dims
        shape = (out_channels, in_channels) + (kernel,) * dims
        fan_in = in_channels * kernel ** dims
        weight = np.zeros(shape) if zero_init else _uniform(rng, fan_in, shape)
        self.weight = Tensor(weight, requires_grad=trainable)
        self.bias = Tensor(np.full(out_channels, float(bias_init)), requires_grad=trainable)

    def forward(self, x: Tensor) -> Tensor:
        return ops.conv(x, self.weight, self.bias, stride=self.stride, padding=self.padding)

