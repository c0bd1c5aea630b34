"""
Gradient gate over every differentiable path of the pipeline

Each registered path builds a small random instance (op, inputs) and is
checked against central differences with diffcore.grad_check. A sign error
can be injected into one path to confirm the gate actually fails.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..diffcore import ops
from ..diffcore.gradcheck import grad_check
from ..diffcore.nn import Conv
from ..diffcore.rng import make_stream
from ..diffcore.tensor import Tensor, as_tensor, make_result
from ..fieldnet.compositing import composite_color_fusion, composite_color_initial
from ..fieldnet.network import FieldNetwork
from ..losses.adversarial import loss_gan_pair
from ..losses.perceptual import PerceptualExtractor, loss_perceptual
from ..losses.points import PointSampleSet
from ..losses.reconstruction import loss_recon, loss_vol
from ..losses.refinement import loss_l1_masked
from ..refine.encoder import ResidualBlock
from ..refine.style_block import StyleBlock
from ..renderer.compositing import composite

logger = logging.getLogger(__name__)

TOLERANCE = 1e-4

Case = Tuple[Callable[..., Tensor], List[Tensor]]
Builder = Callable[[np.random.Generator], Case]

GRAD_PATHS: Dict[str, Builder] = {}


def register_path(name: str):
    def decorator(builder: Builder) -> Builder:
        GRAD_PATHS[name] = builder
        return builder
    return decorator


@dataclass
class GradCheckResult:
    path: str
    max_rel_error: float
    tolerance: float = TOLERANCE
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.max_rel_error)) and self.max_rel_error < self.tolerance


def _weighted_sum(rng: np.random.Generator, *shapes) -> Callable[..., Tensor]:
    """Fixed random projection to a scalar, so no output entry has a trivial gradient"""
    weights = [rng.normal(size=shape) for shape in shapes]

    def reduce(*tensors) -> Tensor:
        total = None
        for weight, tensor in zip(weights, tensors):
            term = ops.reduce_sum(ops.mul(as_tensor(tensor), weight))
            total = term if total is None else ops.add(total, term)
        return total
    return reduce


@register_path('field_eval')
def _field_eval(rng: np.random.Generator) -> Case:
    network = FieldNetwork(4, rng, widths=(6, 6), frequencies=2, fusion=True)
    points = rng.uniform(-1.0, 1.0, size=(3, 3))
    conditions = Tensor(rng.normal(size=(3, 4)))
    reduce = _weighted_sum(rng, (3,), (3, 3), (3, 3))

    def op(conditions, head_weight):
        out = network(points, conditions)
        return reduce(out.alpha, out.color, out.gamma)
    return op, [conditions, network.head.weight]


@register_path('color_blend')
def _color_blend(rng: np.random.Generator) -> Case:
    gamma = Tensor(rng.uniform(0.1, 0.9, size=4))
    gamma3 = Tensor(rng.normal(size=(4, 3)))
    pred = Tensor(rng.uniform(size=(4, 3)))
    source = Tensor(rng.uniform(size=(4, 3)))
    back = rng.uniform(size=(4, 3))
    reduce = _weighted_sum(rng, (4, 3), (4, 3))

    def op(gamma, gamma3, pred, source):
        initial = composite_color_initial(gamma, pred, source)
        fusion = composite_color_fusion(ops.softmax(gamma3, axis=1), pred, source, back)
        return reduce(initial, fusion)
    return op, [gamma, gamma3, pred, source]


@register_path('compositing')
def _compositing(rng: np.random.Generator) -> Case:
    alphas = Tensor(rng.uniform(0.05, 0.95, size=(3, 5)))
    payload = Tensor(rng.uniform(size=(3, 5, 2)))
    reduce = _weighted_sum(rng, (3, 2), (3, 5))

    def op(alphas, payload):
        rendered, weights, _ = composite(alphas, payload)
        return reduce(rendered, weights)
    return op, [alphas, payload]


@register_path('grid_sample')
def _grid_sample(rng: np.random.Generator) -> Case:
    features = Tensor(rng.normal(size=(2, 4, 5)))
    coords = Tensor(rng.uniform(-0.9, 0.9, size=(6, 2)))
    reduce = _weighted_sum(rng, (6, 2))

    def op(features, coords):
        return reduce(ops.grid_sample(features, coords))
    return op, [features, coords]


@register_path('loss_recon')
def _loss_recon(rng: np.random.Generator) -> Case:
    targets = PointSampleSet(rng.uniform(-1, 1, size=(5, 3)), rng.integers(0, 2, size=5),
                             rng.uniform(-1, 1, size=(4, 3)), rng.uniform(size=(4, 3)))
    alpha = Tensor(rng.uniform(size=5))
    color = Tensor(rng.uniform(size=(4, 3)))
    final = Tensor(rng.uniform(size=(4, 3)))
    return (lambda a, c, f: loss_recon(a, c, f, targets)), [alpha, color, final]


@register_path('loss_vol')
def _loss_vol(rng: np.random.Generator) -> Case:
    target = rng.uniform(size=(6, 3))
    color = Tensor(rng.uniform(size=(6, 3)))
    final = Tensor(rng.uniform(size=(6, 3)))
    return (lambda c, f: loss_vol(c, f, target)), [color, final]


@register_path('loss_l1_masked')
def _loss_l1(rng: np.random.Generator) -> Case:
    target = rng.uniform(size=(3, 4, 4))
    mask = rng.uniform(size=(4, 4)) > 0.3
    refined = Tensor(rng.uniform(size=(3, 4, 4)))
    return (lambda r: loss_l1_masked(r, target, mask)), [refined]


@register_path('loss_perceptual')
def _loss_perceptual(rng: np.random.Generator) -> Case:
    extractor = PerceptualExtractor(rng, scales=3, channels=2)
    target = rng.uniform(size=(3, 4, 4))
    mask = rng.uniform(size=(4, 4)) > 0.3
    refined = Tensor(rng.uniform(size=(3, 4, 4)))
    weights = (0.25, 0.5, 1.0)
    return (lambda r: loss_perceptual(r, target, mask, extractor, weights)), [refined]


@register_path('loss_gan')
def _loss_gan(rng: np.random.Generator) -> Case:
    real = Tensor(rng.normal(size=2))
    fake = Tensor(rng.normal(size=2))
    sqnorm = Tensor(rng.uniform(size=2))
    reduce = _weighted_sum(rng, (), ())

    def op(real, fake, sqnorm):
        generator, discriminator = loss_gan_pair(real, fake, sqnorm, lam=10.0)
        return reduce(generator, discriminator)
    return op, [real, fake, sqnorm]


@register_path('style_block')
def _style_block(rng: np.random.Generator) -> Case:
    block = StyleBlock(2, 3, 2, rng, upsample=True)
    block.bias.data = rng.normal(size=3)
    features = Tensor(rng.normal(size=(1, 2, 3, 3)))
    condition = Tensor(rng.normal(size=(1, 2, 3, 3)))
    reduce = _weighted_sum(rng, (1, 3, 6, 6))

    def op(features, condition, weight, bias):
        return reduce(block(features, condition))
    return op, [features, condition, block.conv.weight, block.bias]


@register_path('residual_block')
def _residual_block(rng: np.random.Generator) -> Case:
    block = ResidualBlock(2, 3, rng, stride=2)
    x = Tensor(rng.normal(size=(1, 2, 4, 4)))
    reduce = _weighted_sum(rng, (1, 3, 2, 2))

    def op(x, weight):
        return reduce(block(x))
    return op, [x, block.conv1.weight]


@register_path('conv3d')
def _conv3d(rng: np.random.Generator) -> Case:
    layer = Conv(2, 2, 3, rng, stride=2, dims=3)
    x = Tensor(rng.normal(size=(1, 2, 4, 4, 4)))
    reduce = _weighted_sum(rng, (1, 2, 2, 2, 2))
    return (lambda x, w: reduce(layer(x))), [x, layer.weight]


def _flip_gradient(x: Tensor) -> Tensor:
    """Identity in the forward pass with a negated backward pass"""
    return make_result(x.data.copy(), (x,), lambda g: (-g,), 'sign_error')


def _with_sign_error(op: Callable[..., Tensor]) -> Callable[..., Tensor]:
    def broken(first, *rest):
        return op(_flip_gradient(first), *rest)
    return broken


def run_grad_checks(paths: Optional[Iterable[str]] = None, seeds: Sequence[int] = (0, 1, 2),
                    tolerance: float = TOLERANCE, eps: float = 1e-5,
                    sign_error: Optional[str] = None) -> List[GradCheckResult]:
    """
    Check every selected path on a few seeds; the result holds the worst
    relative error per path. `sign_error` names a path whose analytic
    gradient is negated (negative control).
    """
    names = list(GRAD_PATHS) if paths is None else list(paths)
    unknown = [n for n in names if n not in GRAD_PATHS]
    if unknown:
        raise ValueError(f"Unknown gradient paths {unknown}; registered: {sorted(GRAD_PATHS)}")
    if sign_error is not None and sign_error not in names:
        raise ValueError(f"Sign-error target '{sign_error}' is not among the checked paths")

    results = []
    for name in names:
        started = time.perf_counter()
        worst = 0.0
        for seed in seeds:
            op, inputs = GRAD_PATHS[name](make_stream(seed, 'gradcheck', name))
            if name == sign_error:
                op = _with_sign_error(op)
            worst = max(worst, grad_check(op, inputs, eps=eps))
        result = GradCheckResult(name, worst, tolerance, time.perf_counter() - started)
        level = logging.INFO if result.passed else logging.ERROR
        logger.log(level, f"GRADCHECK: {name} max_rel_error={worst:.3e} "
                          f"{'ok' if result.passed else 'FAILED'} ({result.seconds:.1f}s)")
        results.append(result)
    return results


def results_frame(results: Sequence[GradCheckResult]) -> pd.DataFrame:
    return pd.DataFrame([{'path': r.path, 'max_rel_error': r.max_rel_error, 'tolerance': r.tolerance,
                          'passed': r.passed} for r in results],
                        columns=['path', 'max_rel_error', 'tolerance', 'passed'])
