"""
Initial- and fusion-stage field training

Each step draws a batch of scenes and, per scene, a random source view. The
field is supervised with the per-point reconstruction loss on sampled
points and, unless disabled, with the volume-rendering loss on random rays
of a random view.
"""

from __future__ import annotations

import logging
import os
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..diffcore import ops
from ..diffcore.optim import Adam
from ..diffcore.rng import make_stream
from ..diffcore.tensor import Tensor, backward
from ..diffcore.training import TrainerBase
from ..fieldnet.bundle import BoundField, FieldBundle
from ..losses.loss_log import LossLog
from ..losses.reconstruction import loss_recon, loss_vol
from ..renderer.rays import gen_rays
from ..renderer.render import render_rays
from ..synth.dataset import SceneRecord
from .config import FieldStageConfig, NetworkConfig

logger = logging.getLogger(__name__)

CHECKPOINT_PREFIX = 'fieldnet/'


def build_bundle(network: NetworkConfig, fusion: bool, seed: int = 0) -> FieldBundle:
    """Fresh field bundle; the initialization stream depends only on (seed, stage)"""
    stage = 'fusion' if fusion else 'initial'
    return FieldBundle(make_stream(seed, stage, 'init'), fusion=fusion,
                       image_channels=network.image_channels, image_strides=network.image_strides,
                       volume_channels=network.volume_channels, widths=network.widths,
                       frequencies=network.frequencies)


def back_view(record: SceneRecord, view: int) -> int:
    return record.view_index((record.azimuths[view] + 180.0) % 360.0)


def bind_view(bundle: FieldBundle, record: SceneRecord, view: int,
              back_image: Optional[np.ndarray] = None) -> BoundField:
    """
    Bind the field to one source view of a scene. In fusion mode the backside
    input defaults to the ground-truth image of the opposite view.
    """
    camera = record.camera(view)
    if not bundle.fusion:
        return bundle.bind(record.images[view], record.proxy, camera)
    back = back_view(record, view)
    if back_image is None:
        back_image = record.images[back]
    return bundle.bind(record.images[view], record.proxy, camera,
                       back_image=back_image, back_camera=record.camera(back))


class FieldTrainer(TrainerBase):
    """Optimizes a FieldBundle on a list of scenes; `stage` is 'initial' or 'fusion'"""

    def __init__(self, bundle: FieldBundle, records: Sequence[SceneRecord], settings: FieldStageConfig,
                 run_dir: str, progress: bool = False):
        super().__init__(run_dir, seed=settings.seed, checkpoint_every=settings.checkpoint_every,
                         log_every=settings.log_every, progress=progress)
        if not records:
            raise ValueError("Field training needs at least one scene")
        self.stage = 'fusion' if bundle.fusion else 'initial'
        self.bundle = self.register(CHECKPOINT_PREFIX, bundle)
        self.records = list(records)
        self.settings = settings
        self.optimizer = self.register_optimizer('field', Adam(bundle.named_parameters(),
                                                               learning_rate=settings.learning_rate))
        network = bundle.network
        logger.info(f"{self.stage}: condition width {network.condition_size}, "
                    f"{len(bundle.parameters())} parameter tensors, {len(self.records)} scenes")

    def scene_losses(self, record: SceneRecord, rng: np.random.Generator) -> Dict[str, Tensor]:
        settings = self.settings
        view = int(rng.integers(len(record.azimuths)))
        field = bind_view(self.bundle, record, view)

        targets = record.points.draw(settings.n_points, settings.n_color_points, rng)
        alpha = field.query(targets.occupancy_points).alpha
        colored = field.query(targets.color_points)
        losses = {'recon': loss_recon(alpha, colored.output.color, colored.final_color, targets)}

        if settings.use_vol:
            target_view = int(rng.integers(len(record.azimuths)))
            camera = record.camera(target_view)
            pixels = np.stack([rng.integers(camera.height, size=settings.n_rays),
                               rng.integers(camera.width, size=settings.n_rays)], axis=-1)
            rays = gen_rays(camera, pixels)
            rendered = render_rays(field, rays, payloads=('color', 'final'), n_coarse=settings.n_coarse,
                                   n_fine=settings.n_fine, rng=rng)
            target_colors = record.images[target_view][pixels[:, 0], pixels[:, 1]]
            losses['vol'] = loss_vol(rendered['color'], rendered['final'], target_colors)
        return losses

    def train_step(self, step: int, rng: np.random.Generator) -> Dict[str, float]:
        self.optimizer.zero_grad()
        picks = rng.integers(len(self.records), size=self.settings.batch_size)
        per_scene: List[Dict[str, Tensor]] = [self.scene_losses(self.records[int(i)], rng) for i in picks]
        scale = 1.0 / len(per_scene)

        recon = ops.mul(scale, _sum([losses['recon'] for losses in per_scene]))
        total = recon
        values = {'recon': recon.item()}
        if self.settings.use_vol:
            vol = ops.mul(scale, _sum([losses['vol'] for losses in per_scene]))
            total = ops.add(total, ops.mul(self.settings.lambda_vol, vol))
            values['vol'] = vol.item()
        values['total'] = total.item()

        self.guard(values)
        backward(total, self.bundle.parameters())
        self.optimizer.step()
        return values


def _sum(terms: Sequence[Tensor]) -> Tensor:
    total = terms[0]
    for term in terms[1:]:
        total = ops.add(total, term)
    return total


def train_field(bundle: FieldBundle, records: Sequence[SceneRecord], settings: FieldStageConfig,
                run_dir: str, resume: bool = True, progress: bool = False) -> FieldTrainer:
    """Run a field stage to `settings.iterations`, appending losses to <run_dir>/loss_<stage>.csv"""
    trainer = FieldTrainer(bundle, records, settings, run_dir, progress=progress)
    with LossLog(os.path.join(run_dir, f"loss_{trainer.stage}.csv")) as loss_log:
        if resume and trainer.resume():
            loss_log.truncate_after(trainer.step - 1)
        trainer.fit(settings.iterations, on_step=loss_log.append)
    return trainer
