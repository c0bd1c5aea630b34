"""
Encoders plus field network as one trainable unit

A FieldBundle owns the image encoder, the proxy-volume encoder and the MLP.
Binding it to a source image (and, in fusion mode, a backside image) runs the
encoders once and returns a BoundField that the renderer and the losses query
per point.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from ..conditioning.camera import Camera
from ..conditioning.condition import build_condition, condition_size
from ..conditioning.encoders import ImageEncoder, VolumeEncoder
from ..conditioning.proxy import ProxyVolume
from ..conditioning.sampling import sample_image
from ..diffcore.nn import Layer
from ..diffcore.tensor import Tensor
from .compositing import composite_color_fusion, composite_color_initial
from .network import DESK_WIDTHS, FieldNetwork, FieldOutput

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class FieldQuery:
    """Field output at a batch of points plus the composited color"""
    output: FieldOutput
    final_color: Tensor
    source_rgb: np.ndarray
    back_rgb: Optional[np.ndarray] = None

    @property
    def alpha(self) -> Tensor:
        return self.output.alpha


class FieldBundle(Layer):
    def __init__(self, rng: np.random.Generator, fusion: bool = False,
                 image_channels: Sequence[int] = (16, 16, 16), image_strides: Sequence[int] = (2, 2, 1),
                 volume_channels: Sequence[int] = (8, 8), widths: Sequence[int] = DESK_WIDTHS,
                 frequencies: int = 6, zero_head: bool = False):
        super().__init__()
        self.fusion = fusion
        self.image_encoder = ImageEncoder(rng, channels=image_channels, strides=image_strides)
        self.volume_encoder = VolumeEncoder(rng, channels=volume_channels)
        size = condition_size(self.image_encoder.out_channels, self.volume_encoder.out_channels, fusion)
        self.network = FieldNetwork(size, rng, widths=widths, frequencies=frequencies,
                                    fusion=fusion, zero_head=zero_head)

    def bind(self, source_image: np.ndarray, proxy: ProxyVolume, camera: Camera,
             back_image: Optional[np.ndarray] = None,
             back_camera: Optional[Camera] = None) -> 'BoundField':
        if self.fusion and (back_image is None or back_camera is None):
            raise ValueError("Fusion field requires a backside image and camera")
        image_features = self.image_encoder(source_image)
        volume_features = self.volume_encoder(proxy)
        back_features = self.image_encoder(back_image) if self.fusion else None
        return BoundField(self, source_image, camera, image_features, volume_features,
                          back_image=back_image if self.fusion else None,
                          back_camera=back_camera if self.fusion else None,
                          back_features=back_features)


class BoundField:
    """A FieldBundle with its encoder features computed for one input"""

    def __init__(self, bundle: FieldBundle, source_image: np.ndarray, camera: Camera,
                 image_features, volume_features, back_image=None, back_camera=None, back_features=None):
        self.bundle = bundle
        self.source_image = np.asarray(source_image, dtype=np.float64)
        self.camera = camera
        self.image_features = image_features
        self.volume_features = volume_features
        self.back_image = None if back_image is None else np.asarray(back_image, dtype=np.float64)
        self.back_camera = back_camera
        self.back_features = back_features

    @property
    def fusion(self) -> bool:
        return self.bundle.fusion

    def query(self, points: np.ndarray) -> FieldQuery:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        conditions = build_condition(points, self.image_features, self.volume_features, self.camera,
                                     back_features=self.back_features, back_camera=self.back_camera,
                                     fusion=self.fusion)
        output = self.bundle.network(points, conditions)
        uv, _ = self.camera.project(points)
        source_rgb = sample_image(self.source_image, uv)
        if self.fusion:
            back_uv, _ = self.back_camera.project(points)
            back_rgb = sample_image(self.back_image, back_uv)
            final = composite_color_fusion(output.gamma, output.color, source_rgb, back_rgb)
            return FieldQuery(output, final, source_rgb, back_rgb)
        final = composite_color_initial(output.gamma, output.color, source_rgb)
        return FieldQuery(output, final, source_rgb)

    def __call__(self, points: np.ndarray) -> Tuple[Tensor, Dict[str, Tensor]]:
        """Renderer interface: alpha plus named per-point payloads"""
        result = self.query(points)
        gamma = result.output.gamma
        if gamma.ndim == 1:
            gamma = gamma.reshape((gamma.shape[0], 1))
        payloads = {'color': result.output.color, 'final': result.final_color, 'gamma': gamma}
        return result.alpha, payloads
