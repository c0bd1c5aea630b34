import pytest

from occufield.conditioning.camera import Camera
from occufield.diffcore.rng import make_stream
from occufield.synth.primitives import Sphere
from occufield.synth.scene import AnalyticScene


@pytest.fixture
def rng():
    return make_stream(0, 'tests')


@pytest.fixture
def front_camera():
    return Camera.orbit(0.0, image_size=(16, 16))


@pytest.fixture
def back_camera():
    return Camera.orbit(180.0, image_size=(16, 16))


@pytest.fixture
def sphere_scene():
    """Red sphere of radius 0.5 at the origin"""
    return AnalyticScene([Sphere(center=(0.0, 0.0, 0.0), radius=0.5, albedo=(1.0, 0.0, 0.0))])
