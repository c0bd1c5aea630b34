"""
Depth sampling along rays: stratified coarse samples and importance
resampling from the coarse compositing weights
"""

from __future__ import annotations

from typing import Optional

import numpy as np


def _bin_edges(near: np.ndarray, far: np.ndarray, count: int) -> np.ndarray:
    steps = np.linspace(0.0, 1.0, count + 1)
    return near[:, None] + (far - near)[:, None] * steps[None, :]


def stratified_sample(near, far, count: int, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """
    One uniform draw per equal-length bin of [near, far], shape (R, count).

    Without an rng every depth sits at its bin midpoint.
    """
    if count < 1:
        raise ValueError(f"Sample count must be >= 1, got {count}")
    near = np.atleast_1d(np.asarray(near, dtype=np.float64))
    far = np.atleast_1d(np.asarray(far, dtype=np.float64))
    edges = _bin_edges(near, far, count)
    if rng is None:
        u = np.full((near.shape[0], count), 0.5)
    else:
        u = np.clip(rng.random((near.shape[0], count)), 1e-9, 1.0 - 1e-9)
    return edges[:, :-1] + u * (edges[:, 1:] - edges[:, :-1])


def sample_pdf(near, far, weights: np.ndarray, count: int,
               rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """
    Inverse-transform samples (R, count) from the piecewise-constant pdf
    whose bin j is the j-th equal-length bin of [near, far]. Rays with zero
    total weight fall back to stratified samples.
    """
    near = np.atleast_1d(np.asarray(near, dtype=np.float64))
    far = np.atleast_1d(np.asarray(far, dtype=np.float64))
    weights = np.clip(np.atleast_2d(np.asarray(weights, dtype=np.float64)), 0.0, None)
    rays, bins = weights.shape
    edges = _bin_edges(near, far, bins)
    width = edges[:, 1:] - edges[:, :-1]

    total = weights.sum(axis=1, keepdims=True)
    empty = total[:, 0] <= 0.0
    pdf = weights / np.where(total > 0.0, total, 1.0)
    upper = np.cumsum(pdf, axis=1)
    lower = upper - pdf

    if rng is None:
        u = np.broadcast_to((np.arange(count) + 0.5) / count, (rays, count))
    else:
        u = rng.random((rays, count))

    index = np.empty((rays, count), dtype=np.int64)
    for r in range(rays):
        index[r] = np.searchsorted(upper[r], u[r], side='right')
    index = np.clip(index, 0, bins - 1)
    mass = np.take_along_axis(pdf, index, axis=1)
    start = np.take_along_axis(lower, index, axis=1)
    with np.errstate(divide='ignore', invalid='ignore'):
        frac = np.where(mass > 0.0, (u - start) / mass, 0.5)
    frac = np.clip(frac, 0.0, 1.0)
    depths = np.take_along_axis(edges[:, :-1], index, axis=1) + frac * np.take_along_axis(width, index, axis=1)

    if np.any(empty):
        depths[empty] = stratified_sample(near[empty], far[empty], count, rng)
    return depths


def importance_resample(depths: np.ndarray, weights: np.ndarray, count: int,
                        rng: Optional[np.random.Generator] = None,
                        near=None, far=None) -> np.ndarray:
    """
    Draw `count` fine depths per ray from the coarse weights and merge them
    with the coarse depths, sorted ascending: (R, N + count).

    Bins are the coarse stratification bins of [near, far]; when near/far are
    omitted they are recovered from the first and last coarse depth.
    """
    depths = np.atleast_2d(np.asarray(depths, dtype=np.float64))
    if count < 0:
        raise ValueError(f"Fine sample count must be >= 0, got {count}")
    if count == 0:
        return depths.copy()
    if near is None or far is None:
        near = depths[:, 0] if near is None else near
        far = depths[:, -1] if far is None else far
    fine = sample_pdf(near, far, weights, count, rng)
    return np.sort(np.concatenate([depths, fine], axis=1), axis=1)
