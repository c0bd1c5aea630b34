"""
Refiner training in reconstruction mode, with an optional conditional-GAN term
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Sequence

import numpy as np

from ..conditioning.imageio import to_chw
from ..diffcore import ops
from ..diffcore.nn import Layer
from ..diffcore.optim import Adam
from ..diffcore.rng import make_stream
from ..diffcore.tensor import Tensor, backward
from ..diffcore.training import TrainerBase
from ..losses.adversarial import R1_LAMBDA, loss_gan_pair, nonsaturating_g, r1_directional
from ..losses.loss_log import LossLog
from ..losses.perceptual import PerceptualExtractor, loss_perceptual
from ..losses.refinement import loss_l1_masked, loss_refine_total
from ..renderer.warp import WarpField
from ..utils.validators import validate_non_negative, validate_positive_int
from .discriminator import Discriminator
from .generator import DESK_CHANNELS, RefineGenerator

logger = logging.getLogger(__name__)

GENERATOR_RATIO = 4.0 / 5.0
DISCRIMINATOR_RATIO = 16.0 / 17.0
BASE_LEARNING_RATE = 2e-3

CHECKPOINT_PREFIX = 'refine/'
DISCRIMINATOR_PREFIX = 'refine/disc/'


@dataclass(eq=False)
class RefinePair:
    """
    One training example. Images are (H, W, 3) in [0, 1]; the mask is the
    ground-truth foreground of the target view.
    """
    source: np.ndarray
    coarse: np.ndarray
    warp: WarpField
    target: np.ndarray
    mask: np.ndarray
    scene_id: str = ''

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=np.float64)
        size = self.mask.shape
        for name in ('source', 'coarse', 'target'):
            image = np.asarray(getattr(self, name), dtype=np.float64)
            if image.shape != size + (3,):
                raise ValueError(f"RefinePair {self.scene_id!r}: {name} {image.shape} does not match mask {size}")
            setattr(self, name, image)
        if (self.warp.height, self.warp.width) != size:
            raise ValueError(f"RefinePair {self.scene_id!r}: warp {(self.warp.height, self.warp.width)} "
                             f"does not match mask {size}")

    def tensors(self):
        """(source, coarse, target) as (3, H, W) arrays"""
        return to_chw(self.source), to_chw(self.coarse), to_chw(self.target)


def refiner_adam(named_params: Mapping[str, Tensor], ratio: float,
                 base_learning_rate: float = BASE_LEARNING_RATE) -> Adam:
    """Adam with beta1 = 0, beta2 = 0.99^ratio and lr = base * ratio"""
    return Adam(named_params, learning_rate=base_learning_rate * ratio, beta1=0.0, beta2=0.99 ** ratio)


class RefinerTrainer(TrainerBase):
    """Optimizes the generator on masked L1 + perceptual (+ adversarial when a discriminator is given)"""

    stage = 'refine'

    def __init__(self, generator: RefineGenerator, pairs: Sequence[RefinePair], run_dir: str,
                 seed: int = 0, lambda_l1: float = 1.0, lambda_vgg: float = 1.0, lambda_adv: float = 1.0,
                 discriminator: Optional[Discriminator] = None, r1_lambda: float = R1_LAMBDA,
                 base_learning_rate: float = BASE_LEARNING_RATE,
                 extractor: Optional[Layer] = None, checkpoint_every: int = 500,
                 log_every: int = 50, progress: bool = False):
        super().__init__(run_dir, seed=seed, checkpoint_every=checkpoint_every,
                         log_every=log_every, progress=progress)
        if not pairs:
            raise ValueError("Refiner training needs at least one pair")
        self.pairs = list(pairs)
        self.lambda_l1 = validate_non_negative('lambda_l1', lambda_l1)
        self.lambda_vgg = validate_non_negative('lambda_vgg', lambda_vgg)
        self.lambda_adv = validate_non_negative('lambda_adv', lambda_adv)
        self.r1_lambda = validate_non_negative('r1_lambda', r1_lambda)
        self.generator = self.register(CHECKPOINT_PREFIX, generator)
        self.generator_optimizer = self.register_optimizer(
            'generator', refiner_adam(generator.named_parameters(), GENERATOR_RATIO, base_learning_rate))
        self.discriminator = discriminator
        if discriminator is not None:
            self.register(DISCRIMINATOR_PREFIX, discriminator)
            self.discriminator_optimizer = self.register_optimizer(
                'discriminator', refiner_adam(discriminator.named_parameters(), DISCRIMINATOR_RATIO,
                                              base_learning_rate))
        self.extractor = extractor
        if self.extractor is None and self.lambda_vgg > 0:
            self.extractor = PerceptualExtractor(make_stream(seed, 'refine', 'perceptual'))

    def train_step(self, step: int, rng: np.random.Generator) -> Dict[str, float]:
        pair = self.pairs[int(rng.integers(len(self.pairs)))]
        source, coarse, target = pair.tensors()
        self.generator_optimizer.zero_grad()

        refined = self.generator(coarse, source, pair.warp, pair.mask, rng)
        l1 = loss_l1_masked(refined, target, pair.mask)
        if self.lambda_vgg > 0:
            perceptual = loss_perceptual(refined, target, pair.mask, self.extractor)
        else:
            perceptual = Tensor(0.0)
        adversarial = None
        if self.discriminator is not None:
            fake_logit = self.discriminator(refined, coarse)
            adversarial = ops.mul(self.lambda_adv, ops.mean(ops.neg(nonsaturating_g(fake_logit))))
        total = loss_refine_total(l1, perceptual, adversarial, self.lambda_vgg, self.lambda_l1)

        losses = {'l1': l1.item(), 'perceptual': perceptual.item(), 'total': total.item()}
        if adversarial is not None:
            losses['adversarial'] = adversarial.item()
        self.guard(losses)
        backward(total, self.generator.parameters())
        self.generator_optimizer.step()

        if self.discriminator is not None:
            losses.update(self._discriminator_step(refined.data, coarse, target, rng))
        return losses

    def _discriminator_step(self, refined: np.ndarray, coarse: np.ndarray, target: np.ndarray,
                            rng: np.random.Generator) -> Dict[str, float]:
        # the generator pass left gradients on the discriminator
        self.discriminator_optimizer.zero_grad()
        real_logit = self.discriminator(target, coarse)
        fake_logit = self.discriminator(Tensor(refined), coarse)
        penalty = r1_directional(lambda x: self.discriminator(x, coarse), target, rng)
        _, loss = loss_gan_pair(real_logit, fake_logit, penalty, self.r1_lambda)
        losses = {'discriminator': loss.item(), 'r1': penalty.item()}
        self.guard(losses)
        backward(loss, self.discriminator.parameters())
        self.discriminator_optimizer.step()
        return losses


def build_generator(seed: int = 0, channels: Sequence[int] = DESK_CHANNELS) -> RefineGenerator:
    return RefineGenerator(make_stream(seed, 'refine', 'init'), channels)


def train_refiner(pairs: Sequence[RefinePair], run_dir: str, steps: int = 2000, seed: int = 0,
                  generator: Optional[RefineGenerator] = None, channels: Sequence[int] = DESK_CHANNELS,
                  lambda_l1: float = 1.0, lambda_vgg: float = 1.0, gan: bool = False,
                  lambda_adv: float = 1.0, learning_rate: float = BASE_LEARNING_RATE, resume: bool = True,
                  checkpoint_every: int = 500, log_every: int = 50, progress: bool = False) -> RefinerTrainer:
    """
    Train (or continue training) a refiner and return its trainer.

    `learning_rate` is the base rate; the generator and discriminator
    optimizers scale it by their own ratios.

    Losses are appended to <run_dir>/loss_refine.csv. On a NaN loss the
    trainer raises TrainingAborted and the last checkpoint stays on disk.
    """
    steps = validate_positive_int('steps', steps)
    if not pairs:
        raise ValueError("train_refiner needs a nonempty dataset")
    generator = generator or build_generator(seed, channels)
    discriminator = Discriminator(make_stream(seed, 'refine', 'discriminator')) if gan else None
    trainer = RefinerTrainer(generator, pairs, run_dir, seed=seed, lambda_l1=lambda_l1,
                             lambda_vgg=lambda_vgg, lambda_adv=lambda_adv, discriminator=discriminator,
                             base_learning_rate=validate_non_negative('learning_rate', learning_rate),
                             checkpoint_every=checkpoint_every, log_every=log_every, progress=progress)
    log_path = os.path.join(run_dir, 'loss_refine.csv')
    with LossLog(log_path) as loss_log:
        if resume and trainer.resume():
            loss_log.truncate_after(trainer.step - 1)
        logger.info(f"Refiner training on {len(pairs)} pairs for {steps} steps (gan={gan})")
        trainer.fit(steps, on_step=loss_log.append)
    return trainer
