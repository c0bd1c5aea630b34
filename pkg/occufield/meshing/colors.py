"""
Per-vertex coloring from a texture field
"""

from __future__ import annotations

import logging
from typing import Callable, Optional, Union

import numpy as np

from ..diffcore.tensor import Tensor, no_grad
from ..utils.helpers import chunk_slices
from ..utils.parallel import map_ordered
from .mesh import TriMesh

logger = logging.getLogger(__name__)


def _payload_function(field, payload: str) -> Callable[[np.ndarray], np.ndarray]:
    def evaluate(points: np.ndarray) -> np.ndarray:
        with no_grad():
            out = field(points)
        if isinstance(out, tuple):
            out = out[1][payload]
        if isinstance(out, Tensor):
            out = out.data
        return np.asarray(out, dtype=np.float64).reshape(len(points), -1)
    return evaluate


def vertex_colors(mesh: TriMesh, field: Union[Callable, object], payload: str = 'final',
                  chunk: int = 8192, workers: Optional[int] = 1) -> TriMesh:
    """
    Color every vertex with the field's composited color at its position.

    `field` is either a bound field returning (alpha, payloads), in which case
    `payload` selects the color channel, or a function points -> (N, 3).
    """
    if mesh.n_vertices == 0:
        raise ValueError("Cannot color an empty mesh")
    evaluate = _payload_function(field, payload)
    parts = map_ordered(lambda s: evaluate(mesh.vertices[s]), chunk_slices(mesh.n_vertices, chunk), workers)
    colors = np.clip(np.concatenate(parts), 0.0, 1.0)
    if colors.shape != (mesh.n_vertices, 3):
        raise ValueError(f"Field payload {payload!r} produced {colors.shape}, expected ({mesh.n_vertices}, 3)")
    return mesh.with_colors(colors)
