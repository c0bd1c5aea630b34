"""
Pipeline commands: dataset synthesis, the three training stages,
rendering, end-to-end reconstruction, evaluation and the gradient gate.

Run directory layout:
    checkpoints/<stage>.occf          initial / refine / fusion
    loss_<stage>.csv                  per-step losses
    prerender/<scene>/                coarse backside renders used to train the refiner
    renders/<scene>_<azimuth>/        cmd_render_views output
    reconstruct/<scene>/              cmd_reconstruct output
    eval.csv, gradcheck.csv           reports
"""

from __future__ import annotations

import contextlib
import logging
import os
import shutil
from dataclasses import replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..conditioning.camera import Camera, backside_azimuth
from ..conditioning.imageio import read_image, to_chw, to_hwc, write_image, write_mask
from ..diffcore.checkpoint import load_checkpoint
from ..diffcore.rng import make_stream
from ..diffcore.tensor import no_grad
from ..fieldnet.bundle import BoundField, FieldBundle
from ..fieldnet.compositing import gamma_visualization
from ..meshing.colors import vertex_colors
from ..meshing.export import export_mesh, load_mesh
from ..meshing.marching import marching_cubes
from ..refine.generator import RefineGenerator
from ..refine.trainer import CHECKPOINT_PREFIX as REFINE_PREFIX
from ..refine.trainer import RefinePair, build_generator, train_refiner
from ..renderer.render import RenderedView, mask_from_alpha, render_view
from ..renderer.warp import WarpField, read_warp, render_warp_field, write_warp
from ..synth.dataset import DatasetManager, SceneDataset, SceneRecord
from ..synth.scene import AnalyticScene
from ..utils.helpers import ensure_dir, read_key_values, write_key_values
from ..utils.logger import log_error, log_metrics
from ..utils.parallel import map_ordered
from ..utils.validators import validate_view_spec
from .config import RunConfig
from .evaluation import RING, EvaluationMetrics, SceneMetrics, mesh_metrics, psnr
from .field_trainer import CHECKPOINT_PREFIX as FIELD_PREFIX
from .field_trainer import back_view, bind_view, build_bundle, train_field
from .gradcheck_suite import GradCheckResult, results_frame, run_grad_checks

logger = logging.getLogger(__name__)

PAYLOAD_FILES = {'final': 'coarse_back.png', 'color': 'color_back.png', 'gamma': 'gamma_back.png'}


class StageError(RuntimeError):
    """A reconstruction stage failed; `stage` names it"""

    def __init__(self, stage: str, error: Exception):
        super().__init__(f"Stage '{stage}' failed: {error}")
        self.stage = stage
        self.error = error


@contextlib.contextmanager
def stage(name: str):
    try:
        yield
    except StageError:
        raise
    except (ValueError, RuntimeError, OSError, KeyError) as e:
        log_error(logger, e, f"stage {name}")
        raise StageError(name, e) from e


def run_workers(config: RunConfig) -> Optional[int]:
    return config.workers or None


def checkpoint_path(config: RunConfig, stage_name: str) -> str:
    return os.path.join(config.run_dir, 'checkpoints', f"{stage_name}.occf")


# Data

def split_scenes(config: RunConfig, scene_ids: Sequence[str]) -> Tuple[List[str], List[str]]:
    """(training ids, held-out ids); the last `data.held_out` scenes are held out"""
    scene_ids = sorted(scene_ids)
    held = config.data.held_out
    if held >= len(scene_ids):
        raise ValueError(f"Cannot hold out {held} of {len(scene_ids)} scenes")
    cut = len(scene_ids) - held
    return scene_ids[:cut], scene_ids[cut:]


def load_records(config: RunConfig, scene_ids: Iterable[str]) -> List[SceneRecord]:
    """Load scenes, skipping (with a warning) the ones that cannot be read"""
    manager = DatasetManager(config.data.root)
    records = []
    for scene_id in scene_ids:
        try:
            records.append(manager.load_scene(scene_id))
        except (OSError, ValueError, KeyError) as e:
            logger.warning(f"Skipping scene {scene_id}: {e}")
    return records


def training_records(config: RunConfig) -> List[SceneRecord]:
    manager = DatasetManager(config.data.root)
    scene_ids = manager.list_scenes()
    if not scene_ids:
        raise ValueError(f"No dataset under {config.data.root}; run synth-data first")
    train_ids, _ = split_scenes(config, scene_ids)
    records = load_records(config, train_ids)
    if not records:
        raise ValueError(f"None of the {len(train_ids)} training scenes could be loaded")
    return records


def cmd_synth_data(config: RunConfig, force: bool = False, progress: bool = False) -> SceneDataset:
    data = config.data
    manager = DatasetManager(data.root)
    if manager.list_scenes():
        if not force:
            raise ValueError(f"Dataset already exists under {manager.scenes_dir}; pass --force to regenerate")
        logger.warning(f"Removing existing dataset {manager.scenes_dir}")
        shutil.rmtree(manager.scenes_dir)
    dataset = manager.generate(data.n_scenes, views=data.views, resolution=data.resolution, seed=data.seed,
                               n_occupancy=data.n_occupancy, n_color=data.n_color, sigma=data.sigma,
                               proxy_res=data.proxy_res, inflation=data.inflation,
                               half_extent=data.half_extent, workers=run_workers(config), progress=progress)
    if dataset.failures:
        logger.warning(f"{len(dataset.failures)} scenes failed: {dataset.failures}")
    if not dataset.scene_ids:
        raise RuntimeError("Dataset generation produced no scenes")
    return dataset


# Training

def cmd_train_initial(config: RunConfig, no_vol: bool = False, resume: bool = True,
                      progress: bool = False) -> str:
    """Train the initial-stage field; returns the checkpoint path"""
    settings = replace(config.initial, use_vol=False) if no_vol else config.initial
    if no_vol:
        logger.info("Volume-rendering loss disabled (--no-vol)")
    records = training_records(config)
    bundle = build_bundle(config.network, fusion=False, seed=settings.seed)
    trainer = train_field(bundle, records, settings, config.run_dir, resume=resume, progress=progress)
    return trainer.last_checkpoint


def cmd_train_fusion(config: RunConfig, resume: bool = True, progress: bool = False) -> str:
    """Train the fusion-stage field on ground-truth backside images; returns the checkpoint path"""
    records = training_records(config)
    bundle = build_bundle(config.network, fusion=True, seed=config.fusion.seed)
    expected = 2 * bundle.image_encoder.out_channels + bundle.volume_encoder.out_channels
    if bundle.network.condition_size != expected:
        raise RuntimeError(f"Fusion condition width {bundle.network.condition_size} != {expected}")
    trainer = train_field(bundle, records, config.fusion, config.run_dir, resume=resume, progress=progress)
    return trainer.last_checkpoint


def load_field(config: RunConfig, fusion: bool, path: Optional[str] = None) -> FieldBundle:
    """Rebuild a field bundle from the network config and load its weights"""
    stage_name = 'fusion' if fusion else 'initial'
    path = path or checkpoint_path(config, stage_name)
    if not os.path.isfile(path):
        raise FileNotFoundError(f"No {stage_name} checkpoint at {path}")
    settings = config.fusion if fusion else config.initial
    bundle = build_bundle(config.network, fusion=fusion, seed=settings.seed)
    bundle.load_state_dict(load_checkpoint(path), prefix=FIELD_PREFIX)
    logger.info(f"Loaded {stage_name} field from {path}")
    return bundle


def load_refiner(config: RunConfig, path: Optional[str] = None) -> RefineGenerator:
    path = path or checkpoint_path(config, 'refine')
    if not os.path.isfile(path):
        raise FileNotFoundError(f"No refiner checkpoint at {path}")
    generator = build_generator(config.refine.seed, config.refine.channels)
    generator.load_state_dict(load_checkpoint(path), prefix=REFINE_PREFIX)
    logger.info(f"Loaded refiner from {path}")
    return generator


# Rendering

def view_cameras(record: SceneRecord, azimuth: float) -> Tuple[Camera, Camera]:
    """(source camera at `azimuth`, backside camera at azimuth + 180)"""
    size = (record.images[0].shape[1], record.images[0].shape[0])
    source = Camera.orbit(azimuth, image_size=size, half_extent=record.half_extent)
    back = Camera.orbit(backside_azimuth(azimuth), image_size=size, half_extent=record.half_extent)
    return source, back


def bind_inference(bundle: FieldBundle, record: SceneRecord, view: int,
                   back_image: Optional[np.ndarray] = None) -> BoundField:
    with no_grad():
        return bind_view(bundle, record, view, back_image=back_image)


def render_backside(field: BoundField, record: SceneRecord, azimuth: float, config: RunConfig,
                    payloads: Sequence[str] = ('final', 'gamma'),
                    workers: Optional[int] = None) -> Tuple[RenderedView, WarpField]:
    """Coarse backside render and the backside-to-source warp field"""
    render = config.render
    source_camera, back_camera = view_cameras(record, azimuth)
    view = render_view(field, back_camera, payloads=payloads, n_coarse=render.n_coarse, n_fine=render.n_fine,
                       rng=make_stream(render.seed, 'render', record.scene_id, azimuth),
                       chunk=render.chunk, workers=workers)
    warp = render_warp_field(field, source_camera, back_camera, epsilon=render.warp_epsilon,
                             n_coarse=render.n_coarse, n_fine=render.n_fine,
                             rng=make_stream(render.seed, 'warp', record.scene_id, azimuth),
                             chunk=render.chunk, workers=workers)
    return view, warp


def write_rendered(view: RenderedView, warp: Optional[WarpField], out_dir: str, threshold: float) -> Dict[str, str]:
    ensure_dir(out_dir)
    written = {}
    for name, image in view.channels.items():
        filename = PAYLOAD_FILES.get(name, f"{name}_back.png")
        if name == 'gamma':
            image = gamma_visualization(image.reshape(-1, image.shape[-1])).reshape(image.shape[:2] + (3,))
        written[name] = write_image(os.path.join(out_dir, filename), image)
    written['mask'] = write_mask(os.path.join(out_dir, 'mask_back.png'), mask_from_alpha(view.alpha, threshold))
    if warp is not None:
        written['warp'] = write_warp(os.path.join(out_dir, 'warp.bin'), warp)
    return written


def cmd_render_views(config: RunConfig, scene_id: str, view_spec: str = 'front',
                     payloads: Sequence[str] = ('final', 'gamma'), fusion: bool = False,
                     checkpoint: Optional[str] = None, out_dir: Optional[str] = None) -> Dict[str, str]:
    """
    Render the backside of `scene_id` as seen from `view_spec`: RGB, mask
    (alpha >= threshold), gamma visualization and the warp file.
    """
    azimuth = validate_view_spec(view_spec)
    unknown = [p for p in payloads if p not in PAYLOAD_FILES]
    if unknown:
        raise ValueError(f"Unknown payloads {unknown}; expected some of {sorted(PAYLOAD_FILES)}")
    record = DatasetManager(config.data.root).load_scene(scene_id)
    view = record.view_index(azimuth)
    bundle = load_field(config, fusion, checkpoint)
    field = bind_inference(bundle, record, view)
    rendered, warp = render_backside(field, record, azimuth, config, payloads, run_workers(config))
    out_dir = out_dir or os.path.join(config.run_dir, 'renders', f"{scene_id}_{int(round(azimuth))}")
    written = write_rendered(rendered, warp, out_dir, config.render.mask_threshold)
    logger.info(f"Rendered scene {scene_id} backside of {azimuth:g} deg into {out_dir}")
    return written


# Refinement

def prerender_pair(config: RunConfig, bundle: FieldBundle, record: SceneRecord, azimuth: float = 0.0) -> RefinePair:
    """Coarse backside render + warp for one training scene, cached under prerender/"""
    out_dir = os.path.join(config.run_dir, 'prerender', record.scene_id)
    coarse_path = os.path.join(out_dir, PAYLOAD_FILES['final'])
    warp_path = os.path.join(out_dir, 'warp.bin')
    view = record.view_index(azimuth)
    back = back_view(record, view)
    if os.path.isfile(coarse_path) and os.path.isfile(warp_path):
        coarse, warp = read_image(coarse_path), read_warp(warp_path)
    else:
        field = bind_inference(bundle, record, view)
        rendered, warp = render_backside(field, record, azimuth, config, ('final',), workers=1)
        write_rendered(rendered, warp, out_dir, config.render.mask_threshold)
        coarse = rendered.rgb
    return RefinePair(source=record.images[view], coarse=coarse, warp=warp, target=record.images[back],
                      mask=record.masks[back], scene_id=record.scene_id)


def cmd_train_refine(config: RunConfig, resume: bool = True, progress: bool = False) -> str:
    """Pre-render coarse backsides with the initial field, then train the refiner"""
    bundle = load_field(config, fusion=False)
    records = training_records(config)

    def build(record: SceneRecord) -> Optional[RefinePair]:
        try:
            return prerender_pair(config, bundle, record)
        except (OSError, ValueError) as e:
            logger.warning(f"Pre-render of scene {record.scene_id} failed: {e}")
            return None

    pairs = [p for p in map_ordered(build, records, run_workers(config)) if p is not None]
    logger.info(f"Pre-rendered {len(pairs)}/{len(records)} coarse backsides")
    refine = config.refine
    trainer = train_refiner(pairs, config.run_dir, steps=refine.steps, seed=refine.seed,
                            channels=refine.channels, lambda_l1=refine.lambda_l1, lambda_vgg=refine.lambda_vgg,
                            gan=refine.gan, lambda_adv=refine.lambda_adv, learning_rate=refine.learning_rate,
                            resume=resume, checkpoint_every=refine.checkpoint_every,
                            log_every=refine.log_every, progress=progress)
    return trainer.last_checkpoint


def refine_backside(generator: RefineGenerator, source: np.ndarray, coarse: np.ndarray,
                    warp: WarpField, mask: np.ndarray) -> np.ndarray:
    with no_grad():
        refined = generator(to_chw(coarse), to_chw(source), warp, mask.astype(np.float64))
    return to_hwc(refined.data)


# Reconstruction

def reconstruct_dir(config: RunConfig, scene_id: str) -> str:
    return os.path.join(config.run_dir, 'reconstruct', scene_id)


def cmd_reconstruct(config: RunConfig, scene_id: str, view_spec: str = 'front', use_gt_back: bool = False,
                    initial_checkpoint: Optional[str] = None, refine_checkpoint: Optional[str] = None,
                    fusion_checkpoint: Optional[str] = None, out_dir: Optional[str] = None,
                    render_ring: bool = True, progress: bool = False) -> Dict[str, str]:
    """
    Initial field -> coarse backside + warp -> refined backside -> fusion
    field -> marching cubes -> vertex colors -> mesh export.
    Returns the written artifact paths.
    """
    azimuth = validate_view_spec(view_spec)
    workers = run_workers(config)
    out_dir = out_dir or reconstruct_dir(config, scene_id)
    data_root = os.path.abspath(config.data.root)
    if os.path.commonpath([os.path.abspath(out_dir), data_root]) == data_root:
        raise ValueError(f"Output directory {out_dir} lies inside the dataset {data_root}")

    with stage('load'):
        record = DatasetManager(config.data.root).load_scene(scene_id)
        view = record.view_index(azimuth)
        back = back_view(record, view)
        ensure_dir(out_dir)
    written: Dict[str, str] = {}

    with stage('initial'):
        initial = load_field(config, fusion=False, path=initial_checkpoint)
        field = bind_inference(initial, record, view)
        rendered, warp = render_backside(field, record, azimuth, config, ('final', 'gamma'), workers)
        written.update(write_rendered(rendered, warp, out_dir, config.render.mask_threshold))

    with stage('refine'):
        if use_gt_back:
            back_image = record.images[back]
            logger.info("Refiner bypassed: fusion uses the ground-truth backside")
        else:
            generator = load_refiner(config, refine_checkpoint)
            mask = mask_from_alpha(rendered.alpha, config.render.mask_threshold)
            back_image = refine_backside(generator, record.images[view], rendered.rgb, warp, mask)
            written['refined'] = write_image(os.path.join(out_dir, 'refined_back.png'), back_image)

    with stage('fusion'):
        fusion_bundle = load_field(config, fusion=True, path=fusion_checkpoint)
        fused = bind_inference(fusion_bundle, record, view, back_image=back_image)
        if render_ring:
            for ring_azimuth in RING:
                size = (record.images[0].shape[1], record.images[0].shape[0])
                camera = Camera.orbit(ring_azimuth, image_size=size, half_extent=record.half_extent)
                image = render_view(fused, camera, payloads=('final',), n_coarse=config.render.n_coarse,
                                    n_fine=config.render.n_fine,
                                    rng=make_stream(config.render.seed, 'ring', scene_id, ring_azimuth),
                                    chunk=config.render.chunk, workers=workers).rgb
                key = f"view_{int(ring_azimuth)}"
                written[key] = write_image(os.path.join(out_dir, f"{key}.png"), image)

    with stage('meshing'):
        mesh = marching_cubes(fused, resolution=config.mesh.resolution, iso=config.mesh.iso,
                              bound=record.half_extent, workers=workers, progress=progress)
        if mesh.is_empty:
            logger.warning(f"Scene {scene_id}: fused field has no surface at iso {config.mesh.iso}")
        else:
            mesh = vertex_colors(mesh, fused, payload='final', workers=workers)
        written['mesh'] = export_mesh(mesh, os.path.join(out_dir, f"mesh.{config.mesh.format}"))

    write_key_values(os.path.join(out_dir, 'reconstruct.txt'), {
        'scene_id': scene_id,
        'source_azimuth': float(azimuth),
        'back_azimuth': float(record.azimuths[back]),
        'use_gt_back': use_gt_back,
        'mesh_format': config.mesh.format,
    })
    logger.info(f"Reconstruction of scene {scene_id} written to {out_dir}")
    return written


# Evaluation

def reference_mesh(scene: AnalyticScene, resolution: int, bound: float, workers: Optional[int] = 1):
    """Analytic surface polygonized on the signed distance (exact zero crossing)"""
    return marching_cubes(lambda points: 0.5 - scene.sdf(points), resolution=resolution, iso=0.5,
                          bound=bound, workers=workers)


def _image_psnr(path: str, target: np.ndarray, mask: np.ndarray, label: str) -> float:
    if not os.path.isfile(path):
        logger.warning(f"Missing {label}: {path}")
        return np.nan
    return psnr(read_image(path), target, mask)


def evaluate_scene(config: RunConfig, record: SceneRecord, directory: str) -> SceneMetrics:
    metrics = SceneMetrics(record.scene_id)
    meta_path = os.path.join(directory, 'reconstruct.txt')
    meta = read_key_values(meta_path) if os.path.isfile(meta_path) else {}
    fmt = meta.get('mesh_format', config.mesh.format)
    back = record.view_index(float(meta.get('back_azimuth', 180.0)))

    mesh_path = os.path.join(directory, f"mesh.{fmt}")
    if os.path.isfile(mesh_path):
        scene = record.scene()
        surface = scene.sample_surface(config.eval.n_surface,
                                       make_stream(config.eval.seed, 'surface', record.scene_id))
        reference = reference_mesh(scene, config.mesh.resolution, record.half_extent, run_workers(config))
        metrics.values.update(mesh_metrics(load_mesh(mesh_path), reference, surface,
                                           n_samples=config.eval.n_samples, seed=config.eval.seed,
                                           workers=run_workers(config)))
    else:
        logger.warning(f"Missing mesh: {mesh_path}")

    back_image, back_mask = record.images[back], record.masks[back]
    metrics.values['psnr_coarse_back'] = _image_psnr(os.path.join(directory, PAYLOAD_FILES['final']),
                                                     back_image, back_mask, 'coarse backside')
    metrics.values['psnr_back'] = _image_psnr(os.path.join(directory, 'refined_back.png'),
                                              back_image, back_mask, 'refined backside')
    for azimuth in RING:
        key = f"psnr_view_{int(azimuth)}"
        try:
            index = record.view_index(azimuth)
        except ValueError:
            logger.warning(f"Scene {record.scene_id} has no ground truth at {azimuth:g} deg")
            continue
        metrics.values[key] = _image_psnr(os.path.join(directory, f"view_{int(azimuth)}.png"),
                                          record.images[index], record.masks[index], f"view {azimuth:g}")
    return metrics


def cmd_eval(config: RunConfig, scene_ids: Optional[Sequence[str]] = None, report: Optional[str] = None,
             recon_root: Optional[str] = None) -> EvaluationMetrics:
    """
    Compare reconstructions with ground truth and write the CSV report.
    Defaults to the held-out scenes (all scenes when none are held out).
    """
    manager = DatasetManager(config.data.root)
    if scene_ids is None:
        available = manager.list_scenes()
        if not available:
            raise ValueError(f"No dataset under {config.data.root}")
        train_ids, held_ids = split_scenes(config, available)
        scene_ids = held_ids or train_ids
    recon_root = recon_root or os.path.join(config.run_dir, 'reconstruct')

    evaluation = EvaluationMetrics()
    for scene_id in scene_ids:
        directory = os.path.join(recon_root, scene_id)
        if not os.path.isdir(directory):
            logger.warning(f"No reconstruction for scene {scene_id} in {recon_root}; skipped")
            continue
        try:
            record = manager.load_scene(scene_id)
            evaluation.add(evaluate_scene(config, record, directory))
        except (OSError, ValueError) as e:
            logger.warning(f"Evaluation of scene {scene_id} failed: {e}")
    evaluation.write_report(report or os.path.join(config.run_dir, 'eval.csv'))
    log_metrics(logger, evaluation.aggregate())
    return evaluation


def cmd_grad_check(config: RunConfig, paths: Optional[Sequence[str]] = None,
                   sign_error: Optional[str] = None, report: Optional[str] = None) -> Tuple[bool, List[GradCheckResult]]:
    """Run the gradient gate; returns (all passed, per-path results) and writes gradcheck.csv"""
    results = run_grad_checks(paths, sign_error=sign_error)
    path = report or os.path.join(config.run_dir, 'gradcheck.csv')
    ensure_dir(os.path.dirname(path) or '.')
    results_frame(results).to_csv(path, index=False)
    failed = [r.path for r in results if not r.passed]
    if failed:
        logger.error(f"Gradient check failed for {failed}")
    else:
        logger.info(f"Gradient check passed on {len(results)} paths")
    return not failed, results
