"""
Non-saturating GAN losses with an R1 penalty

g(x) = -log(1 + exp(-x))
generator:     -g(D(fake))
discriminator: -g(D(real)) - g(-D(fake)) + lambda * ||grad_x D(real)||^2
"""

from __future__ import annotations

from typing import Callable, Tuple

import numpy as np

from ..diffcore import ops
from ..diffcore.nn import Layer
from ..diffcore.tensor import Tensor, as_tensor, backward

R1_LAMBDA = 10.0


def nonsaturating_g(x) -> Tensor:
    return ops.neg(ops.softplus(ops.neg(as_tensor(x))))


def loss_gan_pair(real_logit, fake_logit, real_grad_sqnorm, lam: float = R1_LAMBDA) -> Tuple[Tensor, Tensor]:
    """(generator loss, discriminator loss), each averaged over the batch"""
    real_logit, fake_logit = as_tensor(real_logit), as_tensor(fake_logit)
    generator = ops.mean(ops.neg(nonsaturating_g(fake_logit)))
    adversarial = ops.mean(ops.sub(ops.neg(nonsaturating_g(real_logit)), nonsaturating_g(ops.neg(fake_logit))))
    penalty = ops.mul(float(lam), ops.mean(as_tensor(real_grad_sqnorm)))
    return generator, ops.add(adversarial, penalty)


def input_grad(discriminator: Callable[[Tensor], Tensor], real: np.ndarray) -> np.ndarray:
    """
    Exact d sum(D(x)) / dx at the real input (a value, not a graph).
    Parameter gradients touched on the way are cleared.
    """
    x = Tensor(np.array(real, dtype=np.float64), requires_grad=True)
    logits = ops.reduce_sum(discriminator(x))
    grads = backward(logits, [x])
    if isinstance(discriminator, Layer):
        discriminator.zero_grad()
    return grads[x]


def input_grad_sqnorm(discriminator: Callable[[Tensor], Tensor], real: np.ndarray) -> float:
    """Exact ||d sum(D(x)) / dx||^2, the reference value for r1_directional"""
    return float(np.sum(input_grad(discriminator, real) ** 2))


def r1_directional(discriminator: Callable[[Tensor], Tensor], real: np.ndarray,
                   rng: np.random.Generator, eps: float = 1e-3, directions: int = 1) -> Tensor:
    """
    Directional R1: a stochastic penalty differentiable in the discriminator
    parameters, used in place of the exact squared input-gradient norm.

    Each direction draws v ~ N(0, I) and takes the central difference
    s = (D(x + eps v) - D(x - eps v)) / (2 eps), so s^2 = (grad D . v)^2 + O(eps^2)
    and E[s^2] = ||grad D||^2 (input_grad_sqnorm). The tape is first order only,
    which rules out differentiating the exact norm itself. The estimate is
    averaged over `directions`; its relative spread is about sqrt(2 / directions).
    """
    real = np.asarray(real, dtype=np.float64)
    total = None
    for _ in range(directions):
        v = rng.normal(size=real.shape)
        plus = ops.reduce_sum(discriminator(Tensor(real + eps * v)))
        minus = ops.reduce_sum(discriminator(Tensor(real - eps * v)))
        slope = ops.div(ops.sub(plus, minus), 2.0 * eps)
        term = ops.mul(slope, slope)
        total = term if total is None else ops.add(total, term)
    return ops.div(total, float(directions))
