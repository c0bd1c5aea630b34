"""
Front-to-back warp field rendering and its WARP1 file format

The warp field maps every target (backside) pixel to the normalized source
image coordinate of the surface it sees. It is obtained by volume-rendering
project(p, source_cam) along the target rays and normalizing by the
accumulated alpha.
"""

from __future__ import annotations

import logging
import os
import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..conditioning.camera import Camera
from .render import DEFAULT_COARSE, DEFAULT_FINE, render_view

logger = logging.getLogger(__name__)

WARP_MAGIC = b"WARP1"
WARP_EPSILON = 0.1

_RECORD = np.dtype([('u', '<f4'), ('v', '<f4'), ('valid', 'u1')])


@dataclass(eq=False)
class WarpField:
    """coords (H, W, 2) source (u, v) per target pixel; valid (H, W)"""
    coords: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.coords.ndim != 3 or self.coords.shape[-1] != 2 or self.coords.shape[:2] != self.valid.shape:
            raise ValueError(f"WarpField coords {self.coords.shape} / valid {self.valid.shape} mismatch")

    @property
    def height(self) -> int:
        return self.coords.shape[0]

    @property
    def width(self) -> int:
        return self.coords.shape[1]


def render_warp_field(field, source_camera: Camera, target_camera: Camera,
                      epsilon: float = WARP_EPSILON, n_coarse: int = DEFAULT_COARSE,
                      n_fine: int = DEFAULT_FINE, rng: Optional[np.random.Generator] = None,
                      chunk: int = 1024, workers: Optional[int] = 1) -> WarpField:
    """Warp from target pixels to source coordinates; invalid where alpha <= epsilon"""

    def source_grid(points: np.ndarray) -> np.ndarray:
        uv, _ = source_camera.project(points)
        return uv

    view = render_view(field, target_camera, payloads=('source_grid',), n_coarse=n_coarse,
                       n_fine=n_fine, rng=rng, chunk=chunk, workers=workers,
                       extra_payloads={'source_grid': source_grid})
    alpha = view.alpha
    valid = alpha > epsilon
    coords = np.zeros(alpha.shape + (2,))
    coords[valid] = view.channels['source_grid'][valid] / alpha[valid][:, None]
    logger.debug(f"Warp field: {int(valid.sum())}/{valid.size} valid pixels")
    return WarpField(coords=coords, valid=valid)


def write_warp(path: str, warp: WarpField) -> str:
    """WARP1 file: magic, uint32 W and H, then per-pixel (u, v, valid) records"""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    records = np.zeros(warp.valid.size, dtype=_RECORD)
    records['u'] = warp.coords[..., 0].reshape(-1)
    records['v'] = warp.coords[..., 1].reshape(-1)
    records['valid'] = warp.valid.reshape(-1)
    with open(path, 'wb') as f:
        f.write(WARP_MAGIC)
        f.write(struct.pack('<II', warp.width, warp.height))
        f.write(records.tobytes())
    return path


def read_warp(path: str) -> WarpField:
    with open(path, 'rb') as f:
        payload = f.read()
    if payload[:len(WARP_MAGIC)] != WARP_MAGIC:
        raise ValueError(f"{path}: not a warp field file")
    offset = len(WARP_MAGIC)
    width, height = struct.unpack('<II', payload[offset:offset + 8])
    body = payload[offset + 8:]
    if len(body) != width * height * _RECORD.itemsize:
        raise ValueError(f"{path}: truncated warp field")
    records = np.frombuffer(body, dtype=_RECORD)
    coords = np.stack([records['u'], records['v']], axis=-1).astype(np.float64).reshape(height, width, 2)
    return WarpField(coords=coords, valid=records['valid'].reshape(height, width).astype(bool))
