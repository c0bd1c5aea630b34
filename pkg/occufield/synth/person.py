"""
Capsule-person: a seeded articulated stand-in for a human scan

World frame is y-down (the head sits at negative y) and the figure faces +z,
so the front camera (azimuth 0, looking along -z) sees the face.
"""

import logging

import numpy as np

from ..diffcore.rng import make_stream
from .primitives import Box, Capsule, Primitive, Sphere
from .scene import SCENE_BOUND, AnalyticScene
from .textures import Texture

logger = logging.getLogger(__name__)

POSITION_JITTER = 0.02
SIZE_JITTER = 0.08


def _clamp_inside(primitive: Primitive, bound: float = SCENE_BOUND) -> Primitive:
    """Translate a primitive back inside [-bound, bound]^3"""
    lo, hi = primitive.bounds()
    shift = np.maximum(-bound - lo, 0.0) - np.maximum(hi - bound, 0.0)
    if np.any(shift != 0.0):
        return primitive.translated(shift)
    return primitive


def _jittered_color(rng: np.random.Generator, base) -> np.ndarray:
    return np.clip(np.asarray(base, dtype=np.float64) + rng.uniform(-0.08, 0.08, 3), 0.0, 1.0)


def capsule_person(seed: int) -> AnalyticScene:
    """
    Torso box, head and nose spheres, four limb capsules.

    The torso carries different stripe patterns front and back, the head is
    skin-colored in front and hair-colored behind, and the left and right
    sleeves use different textures.
    """
    rng = make_stream(seed, 'capsule_person')

    def jitter(point):
        return np.asarray(point, dtype=np.float64) + rng.uniform(-POSITION_JITTER, POSITION_JITTER, 3)

    def scale():
        return 1.0 + rng.uniform(-SIZE_JITTER, SIZE_JITTER)

    skin = _jittered_color(rng, (0.85, 0.65, 0.5))
    hair = _jittered_color(rng, (0.15, 0.1, 0.08))
    shirt_front = (_jittered_color(rng, (0.85, 0.2, 0.2)), _jittered_color(rng, (0.95, 0.9, 0.85)))
    shirt_back = (_jittered_color(rng, (0.15, 0.3, 0.75)), _jittered_color(rng, (0.9, 0.8, 0.2)))
    sleeve_left = (_jittered_color(rng, (0.2, 0.65, 0.3)), _jittered_color(rng, (0.95, 0.95, 0.95)))
    sleeve_right = (_jittered_color(rng, (0.6, 0.2, 0.6)), _jittered_color(rng, (0.1, 0.1, 0.1)))
    trousers = _jittered_color(rng, (0.25, 0.25, 0.35))
    stripe_frequency = rng.uniform(12.0, 24.0)

    torso_texture = Texture(kind='stripes', colors=shirt_front, frequency=stripe_frequency,
                            phase=rng.uniform(0.0, 2.0 * np.pi), axis=(0.0, 1.0, 0.0),
                            back=Texture(kind='stripes', colors=shirt_back,
                                         frequency=0.5 * stripe_frequency, axis=(1.0, 0.0, 0.0)))
    head_texture = Texture(kind='flat', colors=(skin, skin), back=Texture.flat(hair))

    torso_scale = scale()
    primitives = [
        Box(jitter((0.0, -0.05, 0.0)), np.array([0.2, 0.28, 0.12]) * torso_scale,
            albedo=shirt_front[0], texture=torso_texture),
    ]
    head_center = jitter((0.0, -0.5, 0.0))
    head_radius = 0.15 * scale()
    primitives.append(Sphere(head_center, head_radius, albedo=skin, texture=head_texture))
    primitives.append(Sphere(head_center + np.array([0.0, 0.0, 0.9 * head_radius]), 0.035,
                             albedo=np.clip(skin * 0.85, 0.0, 1.0)))

    for side, sleeve, kind in ((1.0, sleeve_left, 'stripes'), (-1.0, sleeve_right, 'checker')):
        texture = Texture(kind=kind, colors=sleeve, frequency=rng.uniform(14.0, 22.0), axis=(0.0, 1.0, 0.0))
        primitives.append(Capsule(jitter((0.27 * side, -0.28, 0.0)), jitter((0.4 * side, 0.15, 0.0)),
                                  0.06 * scale(), albedo=sleeve[0], texture=texture))
    for side in (1.0, -1.0):
        primitives.append(Capsule(jitter((0.1 * side, 0.25, 0.0)), jitter((0.12 * side, 0.78, 0.0)),
                                  0.075 * scale(), albedo=trousers))

    primitives = [_clamp_inside(p) for p in primitives]
    logger.debug(f"capsule_person(seed={seed}): {len(primitives)} primitives")
    return AnalyticScene(primitives, seed=seed)
