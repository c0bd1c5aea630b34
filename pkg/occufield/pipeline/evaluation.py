"""
Reconstruction quality metrics and the evaluation report

Per scene: P2S and Chamfer of the reconstructed mesh against the analytic
surface, PSNR of the coarse and refined backside images and of the
four-view ring renders. Missing artifacts leave NaN cells and a warning.

The experiment metrics live here too: masked L1, mean alpha over the
exterior shell of the surface, spectral energy at a stripe frequency,
visibility of surface points from a camera and the agreement between
hierarchical and dense compositing.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field as dc_field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from ..conditioning.camera import Camera
from ..diffcore.tensor import no_grad
from ..meshing.mesh import TriMesh
from ..meshing.metrics import metric_chamfer, metric_p2s
from ..renderer.render import render_view
from ..synth.oracle import AnalyticField
from ..synth.scene import AnalyticScene

logger = logging.getLogger(__name__)

RING = (0.0, 90.0, 180.0, 270.0)

REPORT_COLUMNS = ['scene_id', 'p2s', 'chamfer', 'psnr_coarse_back', 'psnr_back'] + \
                 [f"psnr_view_{int(a)}" for a in RING]

AGGREGATE_ROW = 'mean'

SHELL_RANGE = (0.1, 0.3)
DENSE_SAMPLES = 1024


def psnr(pred: np.ndarray, target: np.ndarray, mask: Optional[np.ndarray] = None) -> float:
    """
    10 * log10(1 / MSE) over the masked foreground (all pixels without a mask).
    Images are (H, W, C) in [0, 1]; identical images give +inf.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"PSNR: image shapes differ, {pred.shape} vs {target.shape}")
    diff = (pred - target) ** 2
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != pred.shape[:mask.ndim]:
            raise ValueError(f"PSNR: mask {mask.shape} does not match image {pred.shape}")
        diff = diff[mask]
        if diff.size == 0:
            raise ValueError("PSNR: empty foreground mask")
    mse = float(np.mean(diff))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def masked_l1(pred: np.ndarray, target: np.ndarray, mask: np.ndarray) -> float:
    """Mean absolute difference over the masked pixels and all channels"""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if pred.shape != target.shape or mask.shape != pred.shape[:2]:
        raise ValueError(f"masked L1: shapes {pred.shape}, {target.shape}, mask {mask.shape} do not match")
    if not mask.any():
        raise ValueError("masked L1: empty mask")
    return float(np.abs(pred - target)[mask].mean())


def exterior_shell_points(scene: AnalyticScene, count: int, rng: np.random.Generator,
                          shell: Sequence[float] = SHELL_RANGE, bound: float = 1.0,
                          max_rounds: int = 100) -> np.ndarray:
    """Points uniform in [-bound, bound]^3 whose distance outside the surface lies in `shell`"""
    inner, outer = shell
    if not 0.0 <= inner < outer:
        raise ValueError(f"Shell must satisfy 0 <= inner < outer, got {shell}")
    collected, have = [], 0
    for _ in range(max_rounds):
        if have >= count:
            break
        candidates = rng.uniform(-bound, bound, size=(max(4 * (count - have), 64), 3))
        sdf = scene.sdf(candidates)
        kept = candidates[(sdf >= inner) & (sdf <= outer)][:count - have]
        collected.append(kept)
        have += len(kept)
    if have < count:
        raise ValueError(f"Exterior shell sampling produced only {have}/{count} points")
    return np.concatenate(collected, axis=0)


def exterior_shell_alpha(field, scene: AnalyticScene, rng: np.random.Generator, count: int = 4096,
                         shell: Sequence[float] = SHELL_RANGE, bound: float = 1.0) -> float:
    """
    Mean alpha of `field` over points 0.1 to 0.3 outside the true surface.
    A field that diffuses occupancy into empty space scores high.
    """
    points = exterior_shell_points(scene, count, rng, shell=shell, bound=bound)
    with no_grad():
        alpha, _ = field(points)
    return float(np.mean(alpha.data))


def stripe_energy(image: np.ndarray, mask: np.ndarray, camera: Camera, frequency: float,
                  axis: np.ndarray) -> float:
    """
    Magnitude of the luminance spectrum at one spatial frequency.

    Each masked pixel is placed at its world coordinate along `axis` (an axis
    in the image plane of the orthographic `camera`). The mean-free luminance
    is projected on exp(-i * frequency * s) and normalized by the pixel count,
    so a square wave of contrast c scores about c / pi.
    """
    image = np.asarray(image, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != image.shape[:2]:
        raise ValueError(f"stripe energy: mask {mask.shape} does not match image {image.shape}")
    rows, cols = np.nonzero(mask)
    if rows.size == 0:
        raise ValueError("stripe energy: empty mask")
    luminance = image[rows, cols].mean(axis=-1)
    luminance = luminance - luminance.mean()
    world = camera.unproject(camera.pixel_to_uv(rows, cols), 0.0)
    s = world @ (np.asarray(axis, dtype=np.float64) / np.linalg.norm(axis))
    return float(np.abs(np.sum(luminance * np.exp(-1j * frequency * s))) / rows.size)


def visible_from(scene: AnalyticScene, camera: Camera, points: np.ndarray, tolerance: float = 1e-5) -> np.ndarray:
    """True where the first hit of the camera ray through a surface point is the point itself"""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    direction = camera.direction / np.linalg.norm(camera.direction)
    standoff = 4.0 * camera.half_extent
    origins = points - standoff * direction
    depth, _ = scene.intersect(origins, np.broadcast_to(direction, points.shape).copy())
    return depth >= standoff - tolerance


def _mean_or_nan(values: np.ndarray, label: str) -> float:
    if values.size == 0:
        logger.warning(f"No surface points {label}")
        return np.nan
    return float(values.mean())


def gamma_visibility_means(gamma: np.ndarray, source_visible: np.ndarray,
                           back_visible: np.ndarray) -> Dict[str, float]:
    """
    Mean fusion blend weights split by visibility. gamma is (N, 3) with the
    source share in column 0 and the backside share in column 1.
    """
    gamma = np.asarray(gamma, dtype=np.float64)
    source_visible = np.asarray(source_visible, dtype=bool)
    back_visible = np.asarray(back_visible, dtype=bool)
    if gamma.ndim != 2 or gamma.shape[1] != 3:
        raise ValueError(f"Fusion gamma must be (N, 3), got {gamma.shape}")
    return {
        'gamma1_source': _mean_or_nan(gamma[source_visible, 0], "visible from the source camera"),
        'gamma1_back_only': _mean_or_nan(gamma[back_visible & ~source_visible, 0],
                                         "visible only from the backside camera"),
        'gamma2_back': _mean_or_nan(gamma[back_visible, 1], "visible from the backside camera"),
        'gamma2_source_only': _mean_or_nan(gamma[source_visible & ~back_visible, 1],
                                           "visible only from the source camera"),
    }


def compositing_agreement(scene: AnalyticScene, camera: Camera, n_coarse: int = 24, n_fine: int = 24,
                          dense: int = DENSE_SAMPLES, tolerance: float = 2.0 / 255.0) -> float:
    """
    Share of foreground pixels where the hierarchical render of the exact
    occupancy field matches a dense uniform composite within `tolerance` on
    every channel. Foreground is dense alpha > 0.5.
    """
    field = AnalyticField(scene)
    hierarchical = render_view(field, camera, payloads=('final',), n_coarse=n_coarse, n_fine=n_fine)
    reference = render_view(field, camera, payloads=('final',), n_coarse=dense, n_fine=0)
    foreground = reference.alpha > 0.5
    if not foreground.any():
        raise ValueError("Compositing check on a view without foreground")
    close = np.abs(hierarchical.rgb - reference.rgb).max(axis=-1) <= tolerance
    return float(close[foreground].mean())


@dataclass
class SceneMetrics:
    scene_id: str
    values: Dict[str, float] = dc_field(default_factory=dict)

    def row(self) -> Dict[str, object]:
        out: Dict[str, object] = {'scene_id': self.scene_id}
        for column in REPORT_COLUMNS[1:]:
            out[column] = self.values.get(column, np.nan)
        return out


def mesh_metrics(mesh: TriMesh, reference: TriMesh, surface_points: np.ndarray,
                 n_samples: int = 10000, seed: int = 0, workers: Optional[int] = 1) -> Dict[str, float]:
    """P2S from reference surface points to `mesh` and symmetric Chamfer against the reference mesh"""
    return {
        'p2s': metric_p2s(mesh, surface_points, workers=workers),
        'chamfer': metric_chamfer(mesh, reference, n_samples=n_samples, seed=seed),
    }


class EvaluationMetrics:
    """Collects per-scene metrics and turns them into the report table"""

    def __init__(self, scenes: Optional[Sequence[SceneMetrics]] = None):
        self.scenes: List[SceneMetrics] = list(scenes or [])

    def add(self, scene: SceneMetrics) -> None:
        self.scenes.append(scene)

    def per_scene(self) -> pd.DataFrame:
        frame = pd.DataFrame([s.row() for s in self.scenes], columns=REPORT_COLUMNS)
        return frame

    def aggregate(self) -> Dict[str, float]:
        """Column means over scenes, skipping missing values"""
        frame = self.per_scene()
        if frame.empty:
            return {column: np.nan for column in REPORT_COLUMNS[1:]}
        return {column: float(frame[column].astype(float).mean(skipna=True)) for column in REPORT_COLUMNS[1:]}

    def calculate_all_metrics(self) -> Dict:
        return {
            'scenes': len(self.scenes),
            'per_scene': {s.scene_id: s.row() for s in self.scenes},
            'aggregate': self.aggregate(),
        }

    def to_frame(self) -> pd.DataFrame:
        frame = self.per_scene()
        aggregate = {'scene_id': AGGREGATE_ROW, **self.aggregate()}
        return pd.concat([frame, pd.DataFrame([aggregate], columns=REPORT_COLUMNS)], ignore_index=True)

    def write_report(self, path: str) -> str:
        """CSV with the fixed REPORT_COLUMNS order; infinite PSNR is written as 'inf'"""
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        self.to_frame().to_csv(path, index=False, columns=REPORT_COLUMNS, na_rep='', float_format='%.6f')
        logger.info(f"Evaluation report written: {path} ({len(self.scenes)} scenes)")
        return path


def read_report(path: str) -> pd.DataFrame:
    return pd.read_csv(path, dtype={'scene_id': str})
