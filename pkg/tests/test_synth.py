import os

import numpy as np
import pytest

from occufield.conditioning.camera import Camera
from occufield.diffcore.rng import make_stream
from occufield.renderer.render import render_mask
from occufield.synth import (AnalyticField, AnalyticScene, Box, Capsule, DatasetManager, Sphere, Texture,
                             analytic_color, analytic_occupancy, blob_scene, capsule_person, make_dataset,
                             make_primitive, render_gt, render_gt_view, ring_azimuths)


def test_sphere_occupancy(sphere_scene):
    np.testing.assert_array_equal(analytic_occupancy(sphere_scene, np.array([[0.0, 0.0, 0.0], [0.6, 0.0, 0.0]])),
                                  [1.0, 0.0])


def test_capsule_endpoint_occupancy():
    capsule = Capsule(a=(0.0, -0.3, 0.0), b=(0.0, 0.3, 0.0), radius=0.1)
    scene = AnalyticScene([capsule])
    inside = np.array([[0.099, 0.3, 0.0]])
    outside = np.array([[0.101, 0.3, 0.0]])
    assert analytic_occupancy(scene, inside)[0] == 1.0
    assert analytic_occupancy(scene, outside)[0] == 0.0


def test_box_sdf_and_rotation():
    c, s = np.cos(0.3), np.sin(0.3)
    rotation = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    box = Box(center=(0.1, 0.0, 0.0), half_sizes=(0.2, 0.1, 0.1), rotation=rotation)
    assert box.sdf(np.array([[0.1, 0.0, 0.0]]))[0] == pytest.approx(-0.1)
    tip = np.array([0.1, 0.0, 0.0]) + rotation[:, 0] * 0.2
    assert box.sdf(tip[None])[0] == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        Box(half_sizes=(0.1, -0.1, 0.1))


@pytest.mark.parametrize('primitive', [
    Sphere(center=(0.1, 0.0, -0.2), radius=0.3),
    Capsule(a=(-0.2, -0.1, 0.0), b=(0.3, 0.2, 0.1), radius=0.1),
    Box(center=(0.0, 0.1, 0.0), half_sizes=(0.2, 0.3, 0.1)),
])
def test_surface_samples_and_intersections_lie_on_surface(primitive):
    rng = make_stream(0, 'surface')
    points = primitive.sample_surface(200, rng)
    np.testing.assert_allclose(primitive.sdf(points), 0.0, atol=1e-9)

    camera = Camera.orbit(25.0, image_size=(20, 20))
    view = render_gt_view(AnalyticScene([primitive]), camera)
    hits = view.points[view.mask]
    assert len(hits) > 0
    np.testing.assert_allclose(primitive.sdf(hits), 0.0, atol=1e-9)


def test_untextured_primitive_has_base_albedo():
    scene = AnalyticScene([Sphere(radius=0.4, albedo=(0.1, 0.2, 0.3))])
    points = make_stream(1, 'color').uniform(-1, 1, size=(50, 3))
    np.testing.assert_allclose(analytic_color(scene, points), np.tile([0.1, 0.2, 0.3], (50, 1)))


@pytest.mark.parametrize('primitive', [
    Sphere(center=(0.1, 0.0, -0.2), radius=0.3),
    Capsule(a=(-0.2, -0.1, 0.0), b=(0.3, 0.2, 0.1), radius=0.1),
    Box(center=(0.0, 0.1, 0.0), half_sizes=(0.2, 0.3, 0.1), rotation=[[0.0, -1.0, 0.0], [1.0, 0.0, 0.0],
                                                                      [0.0, 0.0, 1.0]]),
])
def test_surface_point_is_nearest_on_surface(primitive):
    points = make_stream(2, 'nearest').uniform(-0.6, 0.6, size=(300, 3))
    nearest = primitive.surface_point(points)
    np.testing.assert_allclose(primitive.sdf(nearest), 0.0, atol=1e-9)
    np.testing.assert_allclose(np.linalg.norm(points - nearest, axis=1), np.abs(primitive.sdf(points)),
                               atol=1e-9)


def test_off_surface_color_comes_from_nearest_surface_point():
    # stripes along the normal, so p and its surface projection land in different bands
    texture = Texture(kind='stripes', colors=((1.0, 0.0, 0.0), (0.0, 0.0, 1.0)), frequency=10.0,
                      axis=(1.0, 0.0, 0.0))
    scene = AnalyticScene([Sphere(radius=0.5, texture=texture)])
    points = np.array([[0.7, 0.0, 0.0], [0.3, 0.0, 0.0], [0.5, 0.0, 0.0]])
    np.testing.assert_allclose(analytic_color(scene, points), np.tile([0.0, 0.0, 1.0], (3, 1)))
    assert np.allclose(texture.color_at(points[:2]), [1.0, 0.0, 0.0])


def test_box_interior_color_uses_closest_face():
    texture = Texture(kind='stripes', colors=((1.0, 0.0, 0.0), (0.0, 0.0, 1.0)), frequency=10.0, phase=2.5,
                      axis=(0.0, 0.0, 1.0))
    box = Box(half_sizes=(0.2, 0.3, 0.1), texture=texture)
    np.testing.assert_allclose(box.surface_point(np.array([[0.0, 0.0, 0.05]])), [[0.0, 0.0, 0.1]])
    np.testing.assert_allclose(box.color(np.array([[0.0, 0.0, 0.05]])), [[0.0, 0.0, 1.0]])


def test_stripe_period():
    k = 10.0
    texture = Texture(kind='stripes', colors=((1.0, 0.0, 0.0), (0.0, 0.0, 1.0)), frequency=k, phase=0.3)
    t = np.linspace(0.0, 0.5, 37)
    along = np.stack([np.zeros_like(t), t, np.zeros_like(t)], axis=1)
    shifted = along + np.array([0.0, 2.0 * np.pi / k, 0.0])
    np.testing.assert_array_equal(texture.color_at(along), texture.color_at(shifted))
    assert texture.period == pytest.approx(2.0 * np.pi / k)

    half = along + np.array([0.0, np.pi / k, 0.0])
    wave = np.sin(k * t + 0.3)
    clear = np.abs(wave) > 1e-6
    assert np.all(np.any(texture.color_at(along)[clear] != texture.color_at(half)[clear], axis=1))


def test_stripe_colors_change_only_at_boundaries():
    k = 8.0
    texture = Texture(kind='stripes', colors=((1.0, 1.0, 1.0), (0.0, 0.0, 0.0)), frequency=k)
    t = np.linspace(-0.9, 0.9, 20001)
    colors = texture.color_at(np.stack([np.zeros_like(t), t, np.zeros_like(t)], axis=1))[:, 0]
    jumps = t[1:][colors[1:] != colors[:-1]]
    boundaries = np.pi * np.arange(-3, 4) / k
    for jump in jumps:
        assert np.min(np.abs(boundaries - jump)) < 2 * (t[1] - t[0])


def test_back_texture_applies_behind():
    texture = Texture.flat((1.0, 0.0, 0.0))
    texture.back = Texture.flat((0.0, 1.0, 0.0))
    colors = texture.color_at(np.array([[0.0, 0.0, 0.1], [0.0, 0.0, -0.1]]))
    np.testing.assert_allclose(colors, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


def test_texture_validation():
    with pytest.raises(ValueError):
        Texture(kind='plaid')
    with pytest.raises(ValueError):
        Texture(colors=((2.0, 0.0, 0.0), (0.0, 0.0, 0.0)))
    with pytest.raises(ValueError):
        Texture(kind='stripes', frequency=-1.0)


def test_make_primitive():
    sphere = make_primitive('sphere', {'radius': 0.2})
    assert isinstance(sphere, Sphere) and sphere.radius == 0.2
    with pytest.raises(ValueError):
        make_primitive('torus')
    with pytest.raises(ValueError):
        make_primitive('sphere', {'height': 1.0})


def test_scene_bounds_are_enforced():
    with pytest.raises(ValueError):
        AnalyticScene([Sphere(radius=0.95)])
    assert len(AnalyticScene([Sphere(radius=0.95)], check_bounds=False)) == 1


def test_empty_scene_renders_black():
    scene = AnalyticScene([])
    image, mask = render_gt(scene, Camera.orbit(0.0, image_size=(8, 8)))
    assert not mask.any()
    np.testing.assert_array_equal(image, 0.0)
    with pytest.raises(ValueError):
        scene.sample_surface(4, make_stream(0, 'empty'))


def test_sphere_mask_area_is_disc(sphere_scene):
    size = 128
    _, mask = render_gt(sphere_scene, Camera.orbit(0.0, image_size=(size, size)))
    expected = np.pi * (0.5 * (size - 1) / 2.0) ** 2
    assert abs(mask.sum() - expected) < 0.02 * expected


def test_hit_points_sit_on_the_occupancy_boundary(sphere_scene):
    camera = Camera.orbit(0.0, image_size=(24, 24))
    view = render_gt_view(sphere_scene, camera)
    hits = view.points[view.mask]
    eps = 1e-6
    np.testing.assert_array_equal(sphere_scene.occupancy(hits + eps * camera.direction), 1.0)
    np.testing.assert_array_equal(sphere_scene.occupancy(hits - eps * camera.direction), 0.0)


def test_person_hit_points_sit_on_the_occupancy_boundary():
    scene = capsule_person(3)
    camera = Camera.orbit(90.0, image_size=(32, 32))
    view = render_gt_view(scene, camera)
    hits = view.points[view.mask]
    eps = 1e-6
    assert scene.occupancy(hits + eps * camera.direction).mean() >= 0.99
    assert scene.occupancy(hits - eps * camera.direction).mean() <= 0.01


def test_gt_mask_matches_volume_rendered_mask(sphere_scene):
    camera = Camera.orbit(0.0, image_size=(32, 32))
    _, mask = render_gt(sphere_scene, camera)
    rendered = render_mask(AnalyticField(sphere_scene), camera)
    assert (mask == rendered).mean() >= 0.99


def test_capsule_person_is_deterministic():
    a, b = capsule_person(11), capsule_person(11)
    assert a.get_scene_info() == b.get_scene_info()
    points = make_stream(0, 'person').uniform(-1, 1, size=(200, 3))
    np.testing.assert_array_equal(a.sdf(points), b.sdf(points))
    np.testing.assert_array_equal(a.color(points), b.color(points))
    assert a.get_scene_info() != capsule_person(12).get_scene_info()


def test_capsule_person_stays_inside_bounds():
    for seed in range(1000):
        for primitive in capsule_person(seed).primitives:
            lo, hi = primitive.bounds()
            assert np.all(lo >= -0.9 - 1e-9) and np.all(hi <= 0.9 + 1e-9)


def test_capsule_person_front_and_back_differ():
    scene = capsule_person(5)
    front, _ = render_gt(scene, Camera.orbit(0.0, image_size=(32, 32)))
    back, _ = render_gt(scene, Camera.orbit(180.0, image_size=(32, 32)))
    assert np.abs(front - back[:, ::-1]).mean() > 0.02


def test_blob_scene_is_seeded_and_thick():
    for seed in range(50):
        scene = blob_scene(seed)
        sphere, box = scene.primitives
        assert sphere.radius >= 0.3 and np.all(box.half_sizes >= 0.2)
        assert scene.get_scene_info() == blob_scene(seed).get_scene_info()
    assert blob_scene(0).get_scene_info() != blob_scene(1).get_scene_info()


def test_ring_azimuths():
    assert ring_azimuths(4) == [0.0, 90.0, 180.0, 270.0]
    with pytest.raises(ValueError):
        ring_azimuths(3)


SMALL = dict(n_occupancy=64, n_color=32, proxy_res=8)


def test_make_dataset_layout(tmp_path):
    dataset = make_dataset(str(tmp_path), n_scenes=1, views=4, resolution=16, seed=2, **SMALL)
    assert dataset.scene_ids == ['0000'] and len(dataset) == 1
    files = sorted(os.listdir(dataset.scene_dir('0000')))
    assert files == sorted([f"view_{k}.png" for k in range(4)] + [f"mask_{k}.png" for k in range(4)]
                           + ['proxy.vox', 'points.bin', 'meta.txt'])

    record = DatasetManager(str(tmp_path)).load_scene('0000')
    assert record.azimuths == [0.0, 90.0, 180.0, 270.0]
    assert record.images[0].shape == (16, 16, 3)
    assert record.view_index(180.0) == 2
    np.testing.assert_allclose(record.camera(2).direction, [0.0, 0.0, 1.0], atol=1e-12)
    assert record.scene().get_scene_info() == capsule_person(record.seed).get_scene_info()
    with pytest.raises(ValueError):
        record.view_index(45.0)


def test_dataset_regeneration_is_byte_identical(tmp_path):
    first = make_dataset(str(tmp_path / 'a'), n_scenes=2, resolution=16, seed=4, **SMALL)
    second = make_dataset(str(tmp_path / 'b'), n_scenes=2, resolution=16, seed=4, workers=2, **SMALL)
    for scene_id in first.scene_ids:
        for name in os.listdir(first.scene_dir(scene_id)):
            with open(os.path.join(first.scene_dir(scene_id), name), 'rb') as f:
                left = f.read()
            with open(os.path.join(second.scene_dir(scene_id), name), 'rb') as f:
                right = f.read()
            assert left == right, name


def test_dataset_manager_listing(tmp_path):
    manager = DatasetManager(str(tmp_path))
    assert manager.list_scenes() == []
    with pytest.raises(ValueError):
        manager.load_dataset()
    with pytest.raises(ValueError):
        manager.load_scene('0007')
    manager.generate(2, resolution=16, seed=1, **SMALL)
    loaded = manager.load_dataset()
    assert loaded.scene_ids == ['0000', '0001']
    assert (loaded.views, loaded.resolution) == (4, 16)
