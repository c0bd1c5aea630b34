"""
Analytic solid primitives

Every primitive provides an exact signed distance, an exact first-hit ray
intersection, uniform surface sampling and a world-space bounding box.
"""

from abc import ABC, abstractmethod
import logging
from typing import Dict, Optional, Tuple

import numpy as np

from .textures import Texture

logger = logging.getLogger(__name__)


def _as_points(points) -> np.ndarray:
    return np.atleast_2d(np.asarray(points, dtype=np.float64))


def _push_out(points, base, radius) -> np.ndarray:
    """Points at `radius` from `base` along (points - base); degenerate directions use +y"""
    offset = points - base
    length = np.linalg.norm(offset, axis=1, keepdims=True)
    direction = np.where(length > 1e-12, offset / np.maximum(length, 1e-12), np.array([0.0, 1.0, 0.0]))
    return base + radius * direction


def _sphere_entry(origins, directions, center, radius) -> np.ndarray:
    """First non-negative hit of unit-direction rays with a sphere; inf on miss"""
    oc = origins - center
    b = np.einsum('ij,ij->i', directions, oc)
    c = np.einsum('ij,ij->i', oc, oc) - radius * radius
    disc = b * b - c
    root = np.sqrt(np.maximum(disc, 0.0))
    near, far = -b - root, -b + root
    t = np.where(near >= 0.0, near, far)
    return np.where((disc >= 0.0) & (t >= 0.0), t, np.inf)


class Primitive(ABC):
    """
    Base class for scene primitives.

    `parameters` lists the geometric parameters with their defaults, the way
    primitive kinds are described in config.json.
    """

    kind = 'primitive'
    parameters = []

    def __init__(self, albedo=(0.7, 0.7, 0.7), texture: Optional[Texture] = None):
        self.albedo = np.asarray(albedo, dtype=np.float64).reshape(3)
        self.texture = texture

    @property
    @abstractmethod
    def center(self) -> np.ndarray:
        pass

    @abstractmethod
    def sdf(self, points: np.ndarray) -> np.ndarray:
        """Signed distance, negative inside"""

    @abstractmethod
    def intersect(self, origins: np.ndarray, directions: np.ndarray) -> np.ndarray:
        """Depth of the first surface hit at t >= 0 per ray, inf on miss"""

    @abstractmethod
    def surface_point(self, points: np.ndarray) -> np.ndarray:
        """Nearest point on the surface for each query point"""

    @abstractmethod
    def sample_surface(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Area-uniform surface points (count, 3)"""

    @abstractmethod
    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        """World-space axis-aligned bounding box (min, max)"""

    @abstractmethod
    def area(self) -> float:
        pass

    @abstractmethod
    def translated(self, offset: np.ndarray) -> 'Primitive':
        pass

    def local(self, points: np.ndarray) -> np.ndarray:
        return _as_points(points) - self.center

    def color(self, points: np.ndarray) -> np.ndarray:
        """Texture color at the nearest surface point"""
        points = _as_points(points)
        if self.texture is None:
            return np.tile(self.albedo, (points.shape[0], 1))
        return self.texture.color_at(self.local(self.surface_point(points)))

    def get_primitive_info(self) -> Dict:
        lo, hi = self.bounds()
        return {
            'kind': self.kind,
            'center': self.center.tolist(),
            'bounds': [lo.tolist(), hi.tolist()],
            'textured': self.texture is not None,
        }


class Sphere(Primitive):
    kind = 'sphere'
    parameters = [
        {'name': 'center', 'display_name': 'Center', 'default': (0.0, 0.0, 0.0)},
        {'name': 'radius', 'display_name': 'Radius', 'default': 0.5},
    ]

    def __init__(self, center=(0.0, 0.0, 0.0), radius: float = 0.5, **kwargs):
        super().__init__(**kwargs)
        if radius <= 0:
            raise ValueError(f"Sphere radius must be positive, got {radius}")
        self._center = np.asarray(center, dtype=np.float64).reshape(3)
        self.radius = float(radius)

    @property
    def center(self) -> np.ndarray:
        return self._center

    def sdf(self, points):
        return np.linalg.norm(_as_points(points) - self._center, axis=1) - self.radius

    def surface_point(self, points):
        return _push_out(_as_points(points), self._center, self.radius)

    def intersect(self, origins, directions):
        return _sphere_entry(_as_points(origins), _as_points(directions), self._center, self.radius)

    def sample_surface(self, count, rng):
        v = rng.normal(size=(count, 3))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        return self._center + self.radius * v

    def bounds(self):
        return self._center - self.radius, self._center + self.radius

    def area(self):
        return 4.0 * np.pi * self.radius ** 2

    def translated(self, offset):
        return Sphere(self._center + offset, self.radius, albedo=self.albedo, texture=self.texture)


class Capsule(Primitive):
    """Segment a-b swept by a ball of the given radius"""
    kind = 'capsule'
    parameters = [
        {'name': 'a', 'display_name': 'Endpoint A', 'default': (0.0, -0.3, 0.0)},
        {'name': 'b', 'display_name': 'Endpoint B', 'default': (0.0, 0.3, 0.0)},
        {'name': 'radius', 'display_name': 'Radius', 'default': 0.1},
    ]

    def __init__(self, a=(0.0, -0.3, 0.0), b=(0.0, 0.3, 0.0), radius: float = 0.1, **kwargs):
        super().__init__(**kwargs)
        if radius <= 0:
            raise ValueError(f"Capsule radius must be positive, got {radius}")
        self.a = np.asarray(a, dtype=np.float64).reshape(3)
        self.b = np.asarray(b, dtype=np.float64).reshape(3)
        self.radius = float(radius)

    @property
    def center(self):
        return 0.5 * (self.a + self.b)

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.b - self.a))

    def _axis_point(self, p: np.ndarray) -> np.ndarray:
        ba = self.b - self.a
        denom = float(ba @ ba)
        h = np.clip((p - self.a) @ ba / denom, 0.0, 1.0) if denom > 0 else np.zeros(len(p))
        return self.a + h[:, None] * ba

    def sdf(self, points):
        p = _as_points(points)
        return np.linalg.norm(p - self._axis_point(p), axis=1) - self.radius

    def surface_point(self, points):
        p = _as_points(points)
        return _push_out(p, self._axis_point(p), self.radius)

    def intersect(self, origins, directions):
        o, d = _as_points(origins), _as_points(directions)
        best = np.minimum(_sphere_entry(o, d, self.a, self.radius),
                          _sphere_entry(o, d, self.b, self.radius))
        ba = self.b - self.a
        baba = float(ba @ ba)
        if baba == 0:
            return best
        oa = o - self.a
        bard = d @ ba
        baoa = oa @ ba
        rdoa = np.einsum('ij,ij->i', d, oa)
        oaoa = np.einsum('ij,ij->i', oa, oa)
        k2 = baba - bard * bard
        k1 = baba * rdoa - baoa * bard
        k0 = baba * oaoa - baoa * baoa - self.radius ** 2 * baba
        disc = k1 * k1 - k2 * k0
        usable = (np.abs(k2) > 1e-12) & (disc >= 0.0)
        with np.errstate(divide='ignore', invalid='ignore'):
            t = np.where(usable, (-k1 - np.sqrt(np.maximum(disc, 0.0))) / k2, np.inf)
        y = baoa + t * bard
        body = usable & (t >= 0.0) & (y > 0.0) & (y < baba)
        return np.where(body, np.minimum(best, t), best)

    def sample_surface(self, count, rng):
        axis = self.b - self.a
        length = self.length
        unit = axis / length if length > 0 else np.array([0.0, 1.0, 0.0])
        side = 2.0 * np.pi * self.radius * length
        caps = 4.0 * np.pi * self.radius ** 2
        on_body = rng.random(count) < side / (side + caps)

        # orthonormal frame around the axis
        helper = np.array([1.0, 0.0, 0.0]) if abs(unit[0]) < 0.9 else np.array([0.0, 0.0, 1.0])
        e1 = np.cross(unit, helper)
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(unit, e1)

        theta = rng.uniform(0.0, 2.0 * np.pi, count)
        along = rng.random(count)
        radial = np.cos(theta)[:, None] * e1 + np.sin(theta)[:, None] * e2
        body_points = self.a + along[:, None] * axis + self.radius * radial

        v = rng.normal(size=(count, 3))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        cap_base = np.where((v @ unit >= 0.0)[:, None], self.b, self.a)
        cap_points = cap_base + self.radius * v
        return np.where(on_body[:, None], body_points, cap_points)

    def bounds(self):
        lo = np.minimum(self.a, self.b) - self.radius
        hi = np.maximum(self.a, self.b) + self.radius
        return lo, hi

    def area(self):
        return 2.0 * np.pi * self.radius * self.length + 4.0 * np.pi * self.radius ** 2

    def translated(self, offset):
        return Capsule(self.a + offset, self.b + offset, self.radius, albedo=self.albedo, texture=self.texture)


class Box(Primitive):
    """Oriented box; rotation columns are the box axes in world space"""
    kind = 'box'
    parameters = [
        {'name': 'center', 'display_name': 'Center', 'default': (0.0, 0.0, 0.0)},
        {'name': 'half_sizes', 'display_name': 'Half Sizes', 'default': (0.2, 0.3, 0.1)},
    ]

    def __init__(self, center=(0.0, 0.0, 0.0), half_sizes=(0.2, 0.3, 0.1), rotation=None, **kwargs):
        super().__init__(**kwargs)
        self._center = np.asarray(center, dtype=np.float64).reshape(3)
        self.half_sizes = np.asarray(half_sizes, dtype=np.float64).reshape(3)
        if np.any(self.half_sizes <= 0):
            raise ValueError(f"Box half sizes must be positive, got {self.half_sizes}")
        self.rotation = np.eye(3) if rotation is None else np.asarray(rotation, dtype=np.float64).reshape(3, 3)
        if not np.allclose(self.rotation.T @ self.rotation, np.eye(3), atol=1e-9):
            raise ValueError("Box rotation must be orthonormal")

    @property
    def center(self):
        return self._center

    def local(self, points):
        return (_as_points(points) - self._center) @ self.rotation

    def sdf(self, points):
        q = np.abs(self.local(points)) - self.half_sizes
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
        inside = np.minimum(q.max(axis=1), 0.0)
        return outside + inside

    def surface_point(self, points):
        local = self.local(points)
        h = self.half_sizes
        nearest = np.clip(local, -h, h)
        inside = np.all(np.abs(local) <= h, axis=1)
        if np.any(inside):
            # interior points move to the closest face
            rows = np.flatnonzero(inside)
            axis = np.argmin(h - np.abs(local[rows]), axis=1)
            sign = np.where(local[rows, axis] >= 0.0, 1.0, -1.0)
            nearest[rows, axis] = sign * h[axis]
        return nearest @ self.rotation.T + self._center

    def intersect(self, origins, directions):
        o = self.local(origins)
        d = _as_points(directions) @ self.rotation
        with np.errstate(divide='ignore', invalid='ignore'):
            t1 = (-self.half_sizes - o) / d
            t2 = (self.half_sizes - o) / d
        parallel = np.abs(d) < 1e-15
        outside_slab = parallel & (np.abs(o) > self.half_sizes)
        t1 = np.where(parallel, -np.inf, t1)
        t2 = np.where(parallel, np.inf, t2)
        t_enter = np.minimum(t1, t2).max(axis=1)
        t_exit = np.maximum(t1, t2).min(axis=1)
        hit = (t_exit >= np.maximum(t_enter, 0.0)) & ~outside_slab.any(axis=1)
        t = np.where(t_enter >= 0.0, t_enter, t_exit)
        return np.where(hit, t, np.inf)

    def sample_surface(self, count, rng):
        h = self.half_sizes
        face_areas = np.array([h[1] * h[2], h[1] * h[2], h[0] * h[2], h[0] * h[2], h[0] * h[1], h[0] * h[1]])
        face = rng.choice(6, size=count, p=face_areas / face_areas.sum())
        local = rng.uniform(-1.0, 1.0, size=(count, 3)) * h
        axis = face // 2
        sign = np.where(face % 2 == 0, -1.0, 1.0)
        local[np.arange(count), axis] = sign * h[axis]
        return local @ self.rotation.T + self._center

    def bounds(self):
        extent = np.abs(self.rotation) @ self.half_sizes
        return self._center - extent, self._center + extent

    def area(self):
        h = self.half_sizes
        return 8.0 * (h[0] * h[1] + h[1] * h[2] + h[0] * h[2])

    def translated(self, offset):
        return Box(self._center + offset, self.half_sizes, self.rotation, albedo=self.albedo, texture=self.texture)


PRIMITIVE_MAP = {
    'sphere': Sphere,
    'capsule': Capsule,
    'box': Box,
}


def make_primitive(kind: str, params: Optional[Dict] = None, **style) -> Primitive:
    """Build a primitive from config-style parameters; missing ones take defaults"""
    if kind not in PRIMITIVE_MAP:
        raise ValueError(f"Unknown primitive '{kind}'. Available: {list(PRIMITIVE_MAP.keys())}")
    cls = PRIMITIVE_MAP[kind]
    params = dict(params or {})
    unknown = set(params) - {p['name'] for p in cls.parameters} - {'rotation'}
    if unknown:
        raise ValueError(f"Unknown parameters for {kind}: {sorted(unknown)}")
    values = {p['name']: params.get(p['name'], p['default']) for p in cls.parameters}
    if 'rotation' in params:
        values['rotation'] = params['rotation']
    return cls(**values, **style)
