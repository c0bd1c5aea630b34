"""
Scaled-down quality experiments on the synthetic scenes

Each experiment loads (or trains) what it needs from the run directory,
measures both sides of one comparison per scene and reports whether the
expected ordering holds. cmd_experiment writes experiments/<name>.csv.

    compositing   hierarchical render vs dense composite on seeded blob scenes
    initial       initial-stage mesh and novel-view quality on a training scene
    vol-ablation  initial stage trained with and without the volume-rendering loss
    refine        refined vs coarse backsides: masked L1 and stripe energy
    fusion        fusion vs initial stage: Chamfer and backside PSNR
    gamma         fusion blend weights on surface points split by visibility
    determinism   two identical initial + refine runs compared bit for bit
"""

from __future__ import annotations

import hashlib
import logging
import math
import os
from dataclasses import dataclass, field as dc_field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..conditioning.camera import Camera
from ..diffcore.rng import make_stream
from ..diffcore.tensor import no_grad
from ..meshing.marching import marching_cubes
from ..renderer.rays import gen_rays
from ..renderer.render import RenderedView, mask_from_alpha, render_view
from ..synth.blobs import blob_scene
from ..synth.dataset import DatasetManager, SceneRecord
from ..synth.scene import AnalyticScene
from ..utils.helpers import ensure_dir
from ..utils.logger import log_metrics
from .commands import (bind_inference, cmd_train_initial, cmd_train_refine, load_field, load_records,
                       load_refiner, reference_mesh, refine_backside, render_backside, run_workers,
                       split_scenes, stage, training_records)
from .config import RunConfig
from .evaluation import (compositing_agreement, exterior_shell_alpha, gamma_visibility_means, masked_l1,
                         mesh_metrics, psnr, stripe_energy, visible_from)
from .field_trainer import back_view

logger = logging.getLogger(__name__)

EVAL_SCENES = 5
COMPOSITING_SEEDS = (0, 1, 2, 3, 4)
COMPOSITING_RESOLUTION = 32
COMPOSITING_AGREEMENT = 0.95
INITIAL_LIMITS = {'chamfer': 0.05, 'p2s': 0.05, 'psnr': 22.0}
FUSION_WIN_SHARE = 0.8


@dataclass
class ExperimentResult:
    name: str
    passed: bool
    frame: pd.DataFrame
    summary: Dict[str, float] = dc_field(default_factory=dict)

    def write(self, directory: str) -> str:
        path = os.path.join(ensure_dir(directory), f"{self.name}.csv")
        self.frame.to_csv(path, index=False, float_format='%.6f')
        return path


def evaluation_scenes(config: RunConfig, count: Optional[int] = EVAL_SCENES) -> List[SceneRecord]:
    """Up to `count` held-out scenes; the training scenes when none are held out"""
    available = DatasetManager(config.data.root).list_scenes()
    if not available:
        raise ValueError(f"No dataset under {config.data.root}; run synth-data first")
    train_ids, held_ids = split_scenes(config, available)
    if not held_ids:
        logger.warning("No held-out scenes; experiments run on the training scenes")
    scene_ids = held_ids or train_ids
    records = load_records(config, scene_ids[:count] if count else scene_ids)
    if not records:
        raise ValueError(f"None of the scenes {scene_ids} could be loaded")
    return records


def render_record_view(field, record: SceneRecord, view: int, config: RunConfig, label: str) -> RenderedView:
    """Render `field` from the camera of ground-truth view `view`"""
    render = config.render
    return render_view(field, record.camera(view), payloads=('final',), n_coarse=render.n_coarse,
                       n_fine=render.n_fine, rng=make_stream(render.seed, label, record.scene_id, view),
                       chunk=render.chunk, workers=run_workers(config))


def mesh_quality(config: RunConfig, field, record: SceneRecord, reference, surface: np.ndarray,
                 progress: bool = False) -> Dict[str, float]:
    mesh = marching_cubes(field, resolution=config.mesh.resolution, iso=config.mesh.iso,
                          bound=record.half_extent, workers=run_workers(config), progress=progress)
    return mesh_metrics(mesh, reference, surface, n_samples=config.eval.n_samples, seed=config.eval.seed,
                        workers=run_workers(config))


def surface_samples(config: RunConfig, scene: AnalyticScene, record: SceneRecord, label: str) -> np.ndarray:
    return scene.sample_surface(config.eval.n_surface, make_stream(config.eval.seed, label, record.scene_id))


def backside_stripes(scene: AnalyticScene, camera: Camera) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    (frequency, world axis, pixel mask) of the first primitive with a striped
    backside texture, the mask covering the pixels where `camera` sees it.
    """
    for index, primitive in enumerate(scene.primitives):
        back = getattr(primitive.texture, 'back', None)
        if back is None or back.kind != 'stripes':
            continue
        rotation = getattr(primitive, 'rotation', np.eye(3))
        rays = gen_rays(camera)
        depth, owner = scene.intersect(rays.origins, rays.directions)
        region = (owner == index) & rays.valid
        hits = rays.origins[region] + depth[region][:, None] * rays.directions[region]
        region[np.flatnonzero(region)] = primitive.local(hits)[:, 2] < 0.0
        return back.frequency, rotation @ back.axis, region.reshape(camera.height, camera.width)
    raise ValueError("Scene has no primitive with a striped backside")


# Experiments

def run_compositing_oracle(seeds: Sequence[int] = COMPOSITING_SEEDS,
                           resolution: int = COMPOSITING_RESOLUTION) -> ExperimentResult:
    """24 coarse + 24 fine samples against a 1024-sample composite, front view of each blob scene"""
    camera = Camera.orbit(0.0, image_size=(resolution, resolution))
    rows = []
    for seed in seeds:
        agreement = compositing_agreement(blob_scene(seed), camera)
        rows.append({'seed': seed, 'agreement': agreement})
    frame = pd.DataFrame(rows)
    passed = bool((frame['agreement'] >= COMPOSITING_AGREEMENT).all())
    return ExperimentResult('compositing', passed, frame, {'min_agreement': float(frame['agreement'].min())})


def run_initial_reconstruction(config: RunConfig, progress: bool = False) -> ExperimentResult:
    """Mesh P2S / Chamfer and PSNR of the views that are neither source nor backside, first training scene"""
    bundle = load_field(config, fusion=False)
    record = training_records(config)[0]
    scene = record.scene()
    view = record.view_index(0.0)
    back = back_view(record, view)
    field = bind_inference(bundle, record, view)
    reference = reference_mesh(scene, config.mesh.resolution, record.half_extent, run_workers(config))
    row: Dict[str, object] = {'scene_id': record.scene_id}
    row.update(mesh_quality(config, field, record, reference, surface_samples(config, scene, record, 'surface'),
                            progress=progress))
    novel = [i for i in range(len(record.azimuths)) if i not in (view, back)]
    if not novel:
        logger.warning(f"Scene {record.scene_id} has no novel view; scoring the backside")
        novel = [back]
    scores = []
    for index in novel:
        rendered = render_record_view(field, record, index, config, 'novel')
        scores.append(psnr(rendered.rgb, record.images[index], record.masks[index]))
        row[f"psnr_view_{int(record.azimuths[index])}"] = scores[-1]
    row['psnr_min'] = min(scores)
    frame = pd.DataFrame([row])
    passed = (row['chamfer'] < INITIAL_LIMITS['chamfer'] and row['p2s'] < INITIAL_LIMITS['p2s']
              and row['psnr_min'] > INITIAL_LIMITS['psnr'])
    summary = {k: float(v) for k, v in row.items() if k != 'scene_id'}
    return ExperimentResult('initial', bool(passed), frame, summary)


def run_vol_ablation(config: RunConfig, progress: bool = False) -> ExperimentResult:
    """
    Train the initial stage twice on the same budget, under ablation/vol and
    ablation/no_vol. The run with the volume-rendering loss should put less
    alpha in the exterior shell and render the backside with lower error.
    """
    bundles = {}
    for label, no_vol in (('vol', False), ('no_vol', True)):
        variant = config.with_run_dir(os.path.join(config.run_dir, 'ablation', label))
        with stage(f"train {label}"):
            path = cmd_train_initial(variant, no_vol=no_vol, progress=progress)
        bundles[label] = load_field(variant, fusion=False, path=path)

    rows = []
    for record in evaluation_scenes(config):
        scene = record.scene()
        view = record.view_index(0.0)
        back = back_view(record, view)
        row: Dict[str, object] = {'scene_id': record.scene_id}
        for label, bundle in bundles.items():
            field = bind_inference(bundle, record, view)
            row[f"shell_alpha_{label}"] = exterior_shell_alpha(
                field, scene, make_stream(config.eval.seed, 'shell', record.scene_id),
                count=config.eval.n_surface, bound=record.half_extent)
            rendered = render_record_view(field, record, back, config, 'ablation')
            row[f"render_l1_{label}"] = masked_l1(rendered.rgb, record.images[back], record.masks[back])
        rows.append(row)
    frame = pd.DataFrame(rows)
    summary = {k: float(v) for k, v in frame.drop(columns='scene_id').mean().items()}
    passed = (summary['shell_alpha_vol'] < summary['shell_alpha_no_vol']
              and summary['render_l1_vol'] < summary['render_l1_no_vol'])
    return ExperimentResult('vol-ablation', bool(passed), frame, summary)


def run_refine_comparison(config: RunConfig) -> ExperimentResult:
    """Refined backsides must beat the coarse renders on every scene in both masked L1 and stripe energy"""
    initial = load_field(config, fusion=False)
    generator = load_refiner(config)
    rows = []
    for record in evaluation_scenes(config):
        view = record.view_index(0.0)
        back = back_view(record, view)
        field = bind_inference(initial, record, view)
        rendered, warp = render_backside(field, record, 0.0, config, ('final',), run_workers(config))
        mask = mask_from_alpha(rendered.alpha, config.render.mask_threshold)
        refined = refine_backside(generator, record.images[view], rendered.rgb, warp, mask)
        target, target_mask = record.images[back], record.masks[back]
        camera = record.camera(back)
        frequency, axis, region = backside_stripes(record.scene(), camera)
        rows.append({
            'scene_id': record.scene_id,
            'l1_coarse': masked_l1(rendered.rgb, target, target_mask),
            'l1_refined': masked_l1(refined, target, target_mask),
            'stripe_energy_coarse': stripe_energy(rendered.rgb, region, camera, frequency, axis),
            'stripe_energy_refined': stripe_energy(refined, region, camera, frequency, axis),
            'stripe_energy_target': stripe_energy(target, region, camera, frequency, axis),
        })
    frame = pd.DataFrame(rows)
    improved = (frame['l1_refined'] < frame['l1_coarse']) & \
               (frame['stripe_energy_refined'] > frame['stripe_energy_coarse'])
    frame['improved'] = improved
    summary = {k: float(v) for k, v in frame.drop(columns=['scene_id', 'improved']).mean().items()}
    return ExperimentResult('refine', bool(improved.all()), frame, summary)


def run_fusion_comparison(config: RunConfig, progress: bool = False) -> ExperimentResult:
    """
    Per scene, the fusion field (fed the refined backside) against the
    initial field: Chamfer must not grow and backside PSNR must rise, on at
    least 80% of the scenes.
    """
    initial = load_field(config, fusion=False)
    fusion = load_field(config, fusion=True)
    generator = load_refiner(config)
    rows = []
    for record in evaluation_scenes(config):
        scene = record.scene()
        view = record.view_index(0.0)
        back = back_view(record, view)
        reference = reference_mesh(scene, config.mesh.resolution, record.half_extent, run_workers(config))
        surface = surface_samples(config, scene, record, 'surface')
        target, target_mask = record.images[back], record.masks[back]

        field = bind_inference(initial, record, view)
        rendered, warp = render_backside(field, record, 0.0, config, ('final',), run_workers(config))
        mask = mask_from_alpha(rendered.alpha, config.render.mask_threshold)
        refined = refine_backside(generator, record.images[view], rendered.rgb, warp, mask)
        fused = bind_inference(fusion, record, view, back_image=refined)
        fused_back = render_record_view(fused, record, back, config, 'fusion-back')

        before = mesh_quality(config, field, record, reference, surface, progress=progress)
        after = mesh_quality(config, fused, record, reference, surface, progress=progress)
        rows.append({
            'scene_id': record.scene_id,
            'chamfer_initial': before['chamfer'],
            'chamfer_fusion': after['chamfer'],
            'p2s_initial': before['p2s'],
            'p2s_fusion': after['p2s'],
            'psnr_back_initial': psnr(rendered.rgb, target, target_mask),
            'psnr_back_fusion': psnr(fused_back.rgb, target, target_mask),
        })
    frame = pd.DataFrame(rows)
    frame['improved'] = (frame['chamfer_fusion'] <= frame['chamfer_initial']) & \
                        (frame['psnr_back_fusion'] > frame['psnr_back_initial'])
    wins = int(frame['improved'].sum())
    needed = math.ceil(FUSION_WIN_SHARE * len(frame))
    summary = {'wins': float(wins), 'needed': float(needed)}
    summary.update({k: float(v) for k, v in frame.drop(columns=['scene_id', 'improved']).mean().items()})
    return ExperimentResult('fusion', wins >= needed, frame, summary)


def run_gamma_sanity(config: RunConfig) -> ExperimentResult:
    """
    Surface points seen by the source camera should lean on the source image
    (gamma1) more than points only the backside camera sees, and the other
    way round for the backside share (gamma2). Pooled over scenes.
    """
    fusion = load_field(config, fusion=True)
    rows, gammas, from_source, from_back = [], [], [], []
    for record in evaluation_scenes(config):
        scene = record.scene()
        view = record.view_index(0.0)
        back = back_view(record, view)
        fused = bind_inference(fusion, record, view, back_image=record.images[back])
        points = surface_samples(config, scene, record, 'gamma')
        with no_grad():
            gamma = fused.query(points).output.gamma.data
        source_visible = visible_from(scene, record.camera(view), points)
        back_visible = visible_from(scene, record.camera(back), points)
        rows.append({'scene_id': record.scene_id, **gamma_visibility_means(gamma, source_visible, back_visible)})
        gammas.append(gamma)
        from_source.append(source_visible)
        from_back.append(back_visible)
    pooled = gamma_visibility_means(np.concatenate(gammas), np.concatenate(from_source), np.concatenate(from_back))
    frame = pd.DataFrame(rows + [{'scene_id': 'pooled', **pooled}])
    passed = (pooled['gamma1_source'] > pooled['gamma1_back_only']
              and pooled['gamma2_back'] > pooled['gamma2_source_only'])
    return ExperimentResult('gamma', bool(passed), frame, pooled)


def file_digest(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for block in iter(lambda: f.read(1 << 20), b''):
            digest.update(block)
    return digest.hexdigest()


def _identical(a, b) -> bool:
    if isinstance(a, float) and isinstance(b, float):
        return a == b or (math.isnan(a) and math.isnan(b))
    return a == b


def run_determinism(config: RunConfig, progress: bool = False) -> ExperimentResult:
    """
    Train the initial stage and the refiner twice from scratch, under
    determinism/first and determinism/second, and compare checkpoint bytes
    and the initial and refine experiment metrics.
    """
    outcomes = []
    for label in ('first', 'second'):
        variant = config.with_run_dir(os.path.join(config.run_dir, 'determinism', label))
        with stage(f"repeat {label}"):
            initial_path = cmd_train_initial(variant, resume=False, progress=progress)
            refine_path = cmd_train_refine(variant, resume=False, progress=progress)
        outcome: Dict[str, object] = {'initial.occf': file_digest(initial_path),
                                      'refine.occf': file_digest(refine_path)}
        outcome.update({f"initial.{k}": v for k, v in run_initial_reconstruction(variant).summary.items()})
        outcome.update({f"refine.{k}": v for k, v in run_refine_comparison(variant).summary.items()})
        outcomes.append(outcome)
    first, second = outcomes
    rows = [{'item': key, 'first': repr(first[key]), 'second': repr(second.get(key)),
             'identical': _identical(first[key], second.get(key))} for key in first]
    frame = pd.DataFrame(rows)
    differing = list(frame.loc[~frame['identical'], 'item'])
    if differing:
        logger.warning(f"Repeated runs differ in {differing}")
    return ExperimentResult('determinism', not differing, frame, {'differing': float(len(differing))})


EXPERIMENTS: Dict[str, Callable[[RunConfig, bool], ExperimentResult]] = {
    'compositing': lambda config, progress: run_compositing_oracle(),
    'initial': run_initial_reconstruction,
    'vol-ablation': run_vol_ablation,
    'refine': lambda config, progress: run_refine_comparison(config),
    'fusion': run_fusion_comparison,
    'gamma': lambda config, progress: run_gamma_sanity(config),
    'determinism': run_determinism,
}


def cmd_experiment(config: RunConfig, names: Optional[Sequence[str]] = None,
                   progress: bool = False) -> Tuple[bool, List[ExperimentResult]]:
    """Run experiments (all when `names` is empty); returns (all passed, results)"""
    names = list(names) if names else list(EXPERIMENTS)
    unknown = [n for n in names if n not in EXPERIMENTS]
    if unknown:
        raise ValueError(f"Unknown experiments {unknown}; available: {list(EXPERIMENTS)}")
    out_dir = os.path.join(config.run_dir, 'experiments')
    results = []
    for name in names:
        logger.info(f"Experiment {name}")
        result = EXPERIMENTS[name](config, progress)
        path = result.write(out_dir)
        log_metrics(logger, {'experiment': name, 'passed': result.passed, **result.summary})
        if result.passed:
            logger.info(f"Experiment {name} passed ({path})")
        else:
            logger.error(f"Experiment {name} failed ({path})")
        results.append(result)
    return all(r.passed for r in results), results
