"""
Procedural solid textures evaluated in a primitive's local frame
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

TEXTURE_KINDS = ('flat', 'stripes', 'checker')


def _color(value) -> np.ndarray:
    color = np.asarray(value, dtype=np.float64).reshape(3)
    if np.any(color < 0.0) or np.any(color > 1.0):
        raise ValueError(f"Texture colors must lie in [0, 1], got {color}")
    return color


@dataclass(eq=False)
class Texture:
    """
    Two-color procedural texture.

    stripes: colors[0] where sin(frequency * (p . axis) + phase) >= 0, else colors[1]
    checker: the same test on the product of the three per-axis sines
    flat:    colors[0] everywhere

    An optional `back` texture replaces this one where the local z < 0, so a
    primitive can look different from the front and from behind.
    """
    kind: str = 'flat'
    colors: Sequence = ((0.8, 0.8, 0.8), (0.2, 0.2, 0.2))
    frequency: float = 0.0
    phase: float = 0.0
    axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0, 0.0]))
    back: Optional['Texture'] = None

    def __post_init__(self):
        if self.kind not in TEXTURE_KINDS:
            raise ValueError(f"Unknown texture kind '{self.kind}'. Available: {TEXTURE_KINDS}")
        if self.frequency < 0:
            raise ValueError(f"Texture frequency must be >= 0, got {self.frequency}")
        self.colors = (_color(self.colors[0]), _color(self.colors[1]))
        axis = np.asarray(self.axis, dtype=np.float64).reshape(3)
        norm = np.linalg.norm(axis)
        if norm == 0:
            raise ValueError("Texture axis must be non-zero")
        self.axis = axis / norm

    @classmethod
    def flat(cls, color) -> 'Texture':
        return cls(kind='flat', colors=(color, color))

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.frequency if self.frequency > 0 else np.inf

    def color_at(self, local: np.ndarray) -> np.ndarray:
        """Colors (N, 3) at local points (N, 3)"""
        local = np.atleast_2d(np.asarray(local, dtype=np.float64))
        colors = self._front_colors(local)
        if self.back is not None:
            behind = local[:, 2] < 0.0
            if np.any(behind):
                colors[behind] = self.back.color_at(local[behind])
        return colors

    def _front_colors(self, local: np.ndarray) -> np.ndarray:
        if self.kind == 'flat':
            return np.tile(self.colors[0], (local.shape[0], 1))
        if self.kind == 'stripes':
            wave = np.sin(self.frequency * (local @ self.axis) + self.phase)
        else:
            wave = np.prod(np.sin(self.frequency * local + self.phase), axis=1)
        return np.where((wave >= 0.0)[:, None], self.colors[0], self.colors[1])
