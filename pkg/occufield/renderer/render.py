"""
Hierarchical rendering of a field along rays and over whole views

A field is any callable `field(points (M, 3)) -> (alpha (M,), {name: (M, K)})`.
Extra payloads that depend only on geometry (such as source-grid
coordinates) are passed as `extra_payloads={name: fn(points) -> (M, K)}`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field as dc_field
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from ..conditioning.camera import Camera
from ..diffcore import ops
from ..diffcore.tensor import Tensor, as_tensor, no_grad
from ..utils.helpers import chunk_slices
from ..utils.parallel import map_ordered
from .compositing import composite
from .rays import RayBatch, gen_rays
from .sampling import importance_resample, stratified_sample

logger = logging.getLogger(__name__)

DEFAULT_COARSE = 24
DEFAULT_FINE = 24

PayloadFn = Callable[[np.ndarray], np.ndarray]


@dataclass(eq=False)
class RenderedView:
    """Rendered images for one camera; channels maps payload name -> (H, W, K)"""
    alpha: np.ndarray
    channels: Dict[str, np.ndarray] = dc_field(default_factory=dict)

    @property
    def rgb(self) -> np.ndarray:
        for name in ('final', 'color'):
            if name in self.channels:
                return self.channels[name]
        raise KeyError("RenderedView has no color channel")


def ray_depths(field, rays: RayBatch, n_coarse: int = DEFAULT_COARSE, n_fine: int = DEFAULT_FINE,
               rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Coarse pass without gradients, then importance resampling: (R, Nc + Nf)"""
    coarse = stratified_sample(rays.near, rays.far, n_coarse, rng)
    if n_fine == 0:
        return coarse
    with no_grad():
        points = rays.points(coarse).reshape(-1, 3)
        alpha, _ = field(points)
        alphas = alpha.data.reshape(coarse.shape) * rays.valid[:, None]
        _, weights, _ = composite(alphas, np.zeros(coarse.shape + (1,)))
    return importance_resample(coarse, weights.data, n_fine, rng, near=rays.near, far=rays.far)


def render_rays(field, rays: RayBatch, payloads: Sequence[str] = ('final',),
                n_coarse: int = DEFAULT_COARSE, n_fine: int = DEFAULT_FINE,
                rng: Optional[np.random.Generator] = None,
                extra_payloads: Optional[Dict[str, PayloadFn]] = None) -> Dict[str, Tensor]:
    """
    Render rays through the field; differentiable in the field's outputs.

    Returns {'alpha': (R,) accumulated alpha, 'weights': (R, S), 'depths': (R, S),
    <payload>: (R, K)} with invalid rays rendering as zero.
    """
    extra_payloads = extra_payloads or {}
    depths = ray_depths(field, rays, n_coarse, n_fine, rng)
    samples = depths.shape[1]
    points = rays.points(depths).reshape(-1, 3)
    alpha, values = field(points)
    valid = rays.valid.astype(np.float64)[:, None]
    alphas = ops.mul(ops.reshape(alpha, depths.shape), valid)

    out: Dict[str, Tensor] = {'depths': Tensor(depths)}
    weights = None
    for name in payloads:
        if name in extra_payloads:
            payload = as_tensor(extra_payloads[name](points))
        elif name in values:
            payload = values[name]
        else:
            raise KeyError(f"Unknown payload '{name}'; field provides {sorted(values)}")
        payload = ops.reshape(payload, (len(rays), samples, payload.shape[-1]))
        rendered, weights, _ = composite(alphas, payload)
        out[name] = rendered
    if weights is None:
        _, weights, _ = composite(alphas, np.zeros(depths.shape + (1,)))
    out['weights'] = weights
    out['alpha'] = ops.reduce_sum(weights, axis=1)
    return out


def render_view(field, camera: Camera, payloads: Sequence[str] = ('final',),
                n_coarse: int = DEFAULT_COARSE, n_fine: int = DEFAULT_FINE,
                rng: Optional[np.random.Generator] = None, chunk: int = 1024,
                workers: Optional[int] = 1,
                extra_payloads: Optional[Dict[str, PayloadFn]] = None) -> RenderedView:
    """
    Render every pixel of `camera` without recording gradients.

    Pixels are processed in chunks (optionally on a thread pool); with an rng
    each chunk draws from its own child stream so the image does not depend
    on the worker count.
    """
    rays = gen_rays(camera)
    slices = chunk_slices(len(rays), chunk)
    seeds = None if rng is None else rng.integers(0, 2 ** 63 - 1, size=len(slices))

    def render_chunk(job):
        index, sl = job
        chunk_rng = None if seeds is None else np.random.Generator(np.random.Philox(int(seeds[index])))
        with no_grad():
            result = render_rays(field, rays.subset(sl), payloads, n_coarse, n_fine, chunk_rng, extra_payloads)
        return {name: value.data for name, value in result.items() if name not in ('weights', 'depths')}

    parts = map_ordered(render_chunk, list(enumerate(slices)), workers)
    height, width = camera.height, camera.width
    alpha = np.concatenate([p['alpha'] for p in parts]).reshape(height, width)
    channels = {name: np.concatenate([p[name] for p in parts]).reshape(height, width, -1)
                for name in payloads}
    return RenderedView(alpha=alpha, channels=channels)


def render_mask(field, camera: Camera, threshold: float = 0.5, **kwargs) -> np.ndarray:
    """Foreground mask: accumulated alpha >= threshold"""
    view = render_view(field, camera, payloads=(), **kwargs)
    return view.alpha >= threshold


def mask_from_alpha(alpha: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    return np.asarray(alpha) >= threshold
