"""
Central finite-difference gradient checking
"""

from __future__ import annotations

from typing import Callable, Sequence

from .tensor import Tensor, backward, no_grad


def grad_check(op: Callable[..., Tensor], inputs: Sequence[Tensor], eps: float = 1e-5,
               floor: float = 1e-8) -> float:
    """
    Compare analytic gradients of a scalar-valued `op(*inputs)` with central
    differences and return the max relative error
    |analytic - numeric| / max(|analytic|, |numeric|, floor) over all input entries.

    Entries the op does not depend on give identical forward values and
    report zero error. Callers pick inputs whose gradients are well above
    the floor.
    """
    for tensor in inputs:
        tensor.requires_grad = True
        tensor.zero_grad()
    loss = op(*inputs)
    backward(loss, inputs)
    analytic = [t.grad.copy() for t in inputs]

    worst = 0.0
    with no_grad():
        for tensor, grad in zip(inputs, analytic):
            flat = tensor.data.reshape(-1)
            grad_flat = grad.reshape(-1)
            for i in range(flat.size):
                original = flat[i]
                flat[i] = original + eps
                plus = op(*inputs).item()
                flat[i] = original - eps
                minus = op(*inputs).item()
                flat[i] = original
                numeric = (plus - minus) / (2.0 * eps)
                denom = max(abs(grad_flat[i]), abs(numeric), floor)
                worst = max(worst, abs(grad_flat[i] - numeric) / denom)
    return worst
