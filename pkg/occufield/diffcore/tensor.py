"""
Dense float64 tensor with a reverse-mode differentiation tape
"""

from __future__ import annotations

import contextlib
import logging
import threading
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_state = threading.local()


class ShapeError(ValueError):
    """Raised when operand shapes do not conform"""


def is_grad_enabled() -> bool:
    return getattr(_state, 'grad_enabled', True)


@contextlib.contextmanager
def no_grad():
    """Evaluate without recording graph nodes (thread-local)"""
    previous = is_grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


@dataclass
class Node:
    """Graph node recording the producing operation of a tensor"""
    op: str
    parents: Tuple['Tensor', ...]
    backward_fn: BackwardFn


class Tensor:
    """
    Dense n-dimensional float64 value.

    The data lives in a numpy array (flat storage plus shape). Tensors built by
    differentiable operations carry a `node`; leaves with requires_grad=True
    accumulate gradients in `grad` when `backward` runs.
    """

    __slots__ = ('data', 'requires_grad', 'grad', 'node', 'name', '__weakref__')
    __array_priority__ = 1000
    __array_ufunc__ = None

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.node: Optional[Node] = None
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> 'Tensor':
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, params: Optional[Iterable['Tensor']] = None) -> Dict['Tensor', np.ndarray]:
        return backward(self, params)

    def __len__(self) -> int:
        return self.shape[0]

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{flag}{label})"


def as_tensor(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def make_result(data: np.ndarray, parents: Sequence[Tensor], backward_fn: BackwardFn, op: str) -> Tensor:
    """Wrap an op output, recording a node when any parent requires grad"""
    out = Tensor(data)
    if is_grad_enabled() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out.node = Node(op=op, parents=tuple(parents), backward_fn=backward_fn)
    return out


def _topological_order(root: Tensor) -> List[Tensor]:
    """Iterative post-order DFS; parents precede children in the result"""
    order: List[Tensor] = []
    visited = set()
    stack = [(root, False)]
    while stack:
        tensor, expanded = stack.pop()
        if expanded:
            order.append(tensor)
            continue
        if id(tensor) in visited:
            continue
        visited.add(id(tensor))
        stack.append((tensor, True))
        if tensor.node is not None:
            for parent in reversed(tensor.node.parents):
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
    return order


def backward(loss: Tensor, params: Optional[Iterable[Tensor]] = None) -> Dict[Tensor, np.ndarray]:
    """
    Propagate dLoss/dx to every requires_grad leaf reachable from `loss`.

    Each node is visited once in reverse topological order and the tape is
    released afterwards. Returns a map leaf -> gradient; leaves listed in
    `params` that are unreachable map to zeros.
    """
    if loss.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")

    grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    result: Dict[Tensor, np.ndarray] = {}

    if loss.requires_grad:
        for tensor in reversed(_topological_order(loss)):
            grad = grads.pop(id(tensor), None)
            if grad is None:
                continue
            node = tensor.node
            if node is None:
                tensor.grad = grad.copy() if tensor.grad is None else tensor.grad + grad
                result[tensor] = tensor.grad
                continue
            parent_grads = node.backward_fn(grad)
            for parent, parent_grad in zip(node.parents, parent_grads):
                if parent_grad is None or not parent.requires_grad:
                    continue
                if parent_grad.shape != parent.shape:
                    raise ShapeError(
                        f"{node.op} produced gradient of shape {parent_grad.shape} for input {parent.shape}")
                key = id(parent)
                grads[key] = parent_grad if key not in grads else grads[key] + parent_grad
            tensor.node = None

    if params is not None:
        for param in params:
            if param not in result:
                if param.grad is None:
                    param.grad = np.zeros_like(param.data)
                result[param] = param.grad
    return result
