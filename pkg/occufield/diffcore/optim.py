"""
Adaptive-moment (Adam) optimizer
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence

import numpy as np

from .tensor import ShapeError, Tensor

logger = logging.getLogger(__name__)


@dataclass
class OptimState:
    """Per-parameter moments plus the scalar hyperparameters of the update"""
    first_moment: List[np.ndarray]
    second_moment: List[np.ndarray]
    step_count: int = 0
    learning_rate: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    skipped_steps: int = field(default=0)

    @classmethod
    def for_params(cls, params: Sequence[Tensor], **hyper) -> 'OptimState':
        return cls(first_moment=[np.zeros_like(p.data) for p in params],
                   second_moment=[np.zeros_like(p.data) for p in params],
                   **hyper)


def adam_step(params: Sequence[Tensor], grads: Sequence[np.ndarray], state: OptimState) -> bool:
    """
    Apply one bias-corrected Adam update in place.

    Returns False (and leaves params and state untouched) when any gradient
    holds a NaN.
    """
    if not (len(params) == len(grads) == len(state.first_moment) == len(state.second_moment)):
        raise ShapeError(f"adam_step: {len(params)} params, {len(grads)} grads, "
                         f"{len(state.first_moment)} moments")
    for param, grad, m in zip(params, grads, state.first_moment):
        if grad.shape != param.shape or m.shape != param.shape:
            raise ShapeError(f"adam_step: param {param.shape}, grad {grad.shape}, moment {m.shape}")

    if any(np.isnan(g).any() for g in grads):
        state.skipped_steps += 1
        logger.warning(f"NaN gradient at step {state.step_count + 1}; update skipped")
        return False

    state.step_count += 1
    t = state.step_count
    correction1 = 1.0 - state.beta1 ** t
    correction2 = 1.0 - state.beta2 ** t
    for i, (param, grad) in enumerate(zip(params, grads)):
        m = state.first_moment[i] = state.beta1 * state.first_moment[i] + (1.0 - state.beta1) * grad
        v = state.second_moment[i] = state.beta2 * state.second_moment[i] + (1.0 - state.beta2) * grad * grad
        m_hat = m / correction1
        v_hat = v / correction2
        param.data = param.data - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return True


class Adam:
    """Named-parameter wrapper around adam_step that also (de)serializes its state"""

    def __init__(self, named_params: Mapping[str, Tensor], learning_rate: float = 2e-4,
                 beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8):
        self.names = list(named_params.keys())
        self.params = list(named_params.values())
        self.state = OptimState.for_params(self.params, learning_rate=learning_rate,
                                           beta1=beta1, beta2=beta2, epsilon=epsilon)

    def zero_grad(self) -> None:
        for param in self.params:
            param.zero_grad()

    def step(self) -> bool:
        grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in self.params]
        return adam_step(self.params, grads, self.state)

    def state_dict(self, prefix: str = 'adam/') -> Dict[str, np.ndarray]:
        state = {f"{prefix}step": np.array([float(self.state.step_count)])}
        for name, m, v in zip(self.names, self.state.first_moment, self.state.second_moment):
            state[f"{prefix}m/{name}"] = m.copy()
            state[f"{prefix}v/{name}"] = v.copy()
        return state

    def load_state_dict(self, state: Mapping[str, np.ndarray], prefix: str = 'adam/') -> None:
        key = f"{prefix}step"
        if key not in state:
            raise ValueError(f"Optimizer state missing '{key}'")
        self.state.step_count = int(np.asarray(state[key]).reshape(-1)[0])
        for i, name in enumerate(self.names):
            for slot, moments in (('m', self.state.first_moment), ('v', self.state.second_moment)):
                value = np.asarray(state[f"{prefix}{slot}/{name}"], dtype=np.float64)
                if value.shape != moments[i].shape:
                    raise ShapeError(f"Optimizer moment {slot}/{name}: {value.shape} != {moments[i].shape}")
                moments[i] = value.copy()
