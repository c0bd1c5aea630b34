"""
Synthetic dataset assembly and loading

Run directory layout:
    scenes/<id>/view_<k>.png, mask_<k>.png   renders on a uniform azimuth ring
    scenes/<id>/proxy.vox                     VOX1 occupancy proxy
    scenes/<id>/points.bin                    PTS1 point supervision set
    scenes/<id>/meta.txt                      key=value: seeds, azimuths, camera params
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from tqdm import tqdm

from ..conditioning.camera import Camera
from ..conditioning.imageio import read_image, read_mask, write_image, write_mask
from ..conditioning.proxy import ProxyVolume, read_proxy, voxelize_proxy, write_proxy
from ..diffcore.rng import make_stream
from ..losses.points import PointSampleSet, read_points, sample_points, write_points
from ..utils.helpers import ensure_dir, parse_float_list, read_key_values, write_key_values
from ..utils.parallel import map_ordered
from .person import capsule_person
from .render_gt import render_gt
from .scene import AnalyticScene

logger = logging.getLogger(__name__)


def ring_azimuths(views: int) -> List[float]:
    """Uniform azimuth ring starting at the front view; views=4 -> 0, 90, 180, 270"""
    if views < 2 or views % 2:
        raise ValueError(f"View count must be an even number >= 2 (front/back pair), got {views}")
    return [360.0 * k / views for k in range(views)]


def scene_seed(seed: int, index: int) -> int:
    return int(make_stream(seed, 'scene', index).integers(0, 2 ** 31 - 1))


@dataclass(eq=False)
class SceneRecord:
    """One scene loaded from disk"""
    scene_id: str
    seed: int
    azimuths: List[float]
    images: List[np.ndarray]
    masks: List[np.ndarray]
    proxy: ProxyVolume
    points: PointSampleSet
    half_extent: float = 1.0
    meta: Dict[str, str] = field(default_factory=dict)

    @property
    def resolution(self) -> int:
        return self.images[0].shape[0]

    def camera(self, view: int) -> Camera:
        size = (self.images[view].shape[1], self.images[view].shape[0])
        return Camera.orbit(self.azimuths[view], image_size=size, half_extent=self.half_extent)

    def view_index(self, azimuth: float) -> int:
        for i, a in enumerate(self.azimuths):
            if abs((a - azimuth + 180.0) % 360.0 - 180.0) < 1e-6:
                return i
        raise ValueError(f"Scene {self.scene_id} has no view at azimuth {azimuth}")

    def scene(self) -> AnalyticScene:
        """Regenerate the analytic scene behind this record"""
        return capsule_person(self.seed)


@dataclass
class SceneDataset:
    root: str
    scene_ids: List[str]
    views: int
    resolution: int
    failures: List[str] = field(default_factory=list)

    def scene_dir(self, scene_id: str) -> str:
        return os.path.join(self.root, 'scenes', scene_id)

    def __len__(self) -> int:
        return len(self.scene_ids)


class DatasetManager:
    """
    Synthetic scene generation with on-disk storage.
    Builds capsule-person scenes, renders their views and stores everything
    under a run directory.
    """

    def __init__(self, root: str):
        self.root = root
        self.scenes_dir = os.path.join(root, 'scenes')

    def generate(self, n_scenes: int, views: int = 4, resolution: int = 128, seed: int = 0,
                 n_occupancy: int = 5000, n_color: int = 5000, sigma: float = 0.05,
                 proxy_res: int = 32, inflation: float = 0.05, half_extent: float = 1.0,
                 workers: Optional[int] = 1, progress: bool = False) -> SceneDataset:
        if n_scenes < 1:
            raise ValueError(f"n_scenes must be >= 1, got {n_scenes}")
        azimuths = ring_azimuths(views)
        ensure_dir(self.scenes_dir)

        def build(index: int) -> Optional[str]:
            scene_id = f"{index:04d}"
            try:
                self._write_scene(scene_id, scene_seed(seed, index), seed, azimuths, resolution,
                                  n_occupancy, n_color, sigma, proxy_res, inflation, half_extent)
                return scene_id
            except (OSError, ValueError) as e:
                logger.warning(f"Scene {scene_id} failed: {e}")
                return None

        indices = range(n_scenes)
        if progress:
            indices = tqdm(indices, desc="scenes", disable=None)
        results = map_ordered(build, indices, workers)
        done = [r for r in results if r is not None]
        failed = [f"{i:04d}" for i, r in enumerate(results) if r is None]
        logger.info(f"Generated {len(done)}/{n_scenes} scenes in {self.scenes_dir}")
        return SceneDataset(self.root, done, views, resolution, failed)

    def _write_scene(self, scene_id: str, seed_value: int, dataset_seed: int, azimuths: List[float],
                     resolution: int, n_occupancy: int, n_color: int, sigma: float,
                     proxy_res: int, inflation: float, half_extent: float) -> None:
        directory = ensure_dir(os.path.join(self.scenes_dir, scene_id))
        scene = capsule_person(seed_value)
        for k, azimuth in enumerate(azimuths):
            camera = Camera.orbit(azimuth, image_size=(resolution, resolution), half_extent=half_extent)
            image, mask = render_gt(scene, camera)
            write_image(os.path.join(directory, f"view_{k}.png"), image)
            write_mask(os.path.join(directory, f"mask_{k}.png"), mask)
        write_proxy(os.path.join(directory, 'proxy.vox'), voxelize_proxy(scene, proxy_res, inflation))
        points = sample_points(scene, n_occupancy, n_color, sigma, make_stream(seed_value, 'points'))
        write_points(os.path.join(directory, 'points.bin'), points)
        write_key_values(os.path.join(directory, 'meta.txt'), {
            'scene_id': scene_id,
            'seed': dataset_seed,
            'scene_seed': seed_value,
            'views': len(azimuths),
            'resolution': resolution,
            'azimuths': [float(a) for a in azimuths],
            'half_extent': float(half_extent),
            'proxy_res': proxy_res,
            'inflation': float(inflation),
            'sigma': float(sigma),
        })

    def list_scenes(self) -> List[str]:
        if not os.path.isdir(self.scenes_dir):
            return []
        return sorted(d for d in os.listdir(self.scenes_dir)
                      if os.path.isfile(os.path.join(self.scenes_dir, d, 'meta.txt')))

    def load_scene(self, scene_id: str) -> SceneRecord:
        directory = os.path.join(self.scenes_dir, scene_id)
        meta_path = os.path.join(directory, 'meta.txt')
        if not os.path.isfile(meta_path):
            raise ValueError(f"Scene {scene_id} not found under {self.scenes_dir}")
        meta = read_key_values(meta_path)
        azimuths = parse_float_list(meta['azimuths'])
        images = [read_image(os.path.join(directory, f"view_{k}.png")) for k in range(len(azimuths))]
        masks = [read_mask(os.path.join(directory, f"mask_{k}.png")) for k in range(len(azimuths))]
        return SceneRecord(scene_id=scene_id, seed=int(meta['scene_seed']), azimuths=azimuths,
                           images=images, masks=masks,
                           proxy=read_proxy(os.path.join(directory, 'proxy.vox')),
                           points=read_points(os.path.join(directory, 'points.bin')),
                           half_extent=float(meta.get('half_extent', 1.0)), meta=meta)

    def load_dataset(self) -> SceneDataset:
        scene_ids = self.list_scenes()
        if not scene_ids:
            raise ValueError(f"No scenes found under {self.scenes_dir}")
        meta = read_key_values(os.path.join(self.scenes_dir, scene_ids[0], 'meta.txt'))
        return SceneDataset(self.root, scene_ids, int(meta['views']), int(meta['resolution']))


def make_dataset(root: str, n_scenes: int, views: int = 4, resolution: int = 128,
                 seed: int = 0, **kwargs) -> SceneDataset:
    return DatasetManager(root).generate(n_scenes, views=views, resolution=resolution, seed=seed, **kwargs)
