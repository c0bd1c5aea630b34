import numpy as np
import pytest

from occufield.diffcore.rng import make_stream
from occufield.meshing import (EMPTY_DISTANCE, TriMesh, export_mesh, load_mesh, marching_cubes, mesh_distances,
                               mesh_from_grid, metric_chamfer, metric_p2s, point_triangle_distances,
                               vertex_colors)
from occufield.synth import AnalyticField


def smooth_sphere(radius):
    def alpha(points):
        return 0.5 - (np.linalg.norm(points, axis=1) - radius)
    return alpha


@pytest.fixture(scope='module')
def sphere_mesh():
    return marching_cubes(smooth_sphere(0.5), resolution=48)


def test_sphere_is_closed_genus_zero():
    resolution = 32
    mesh = marching_cubes(smooth_sphere(0.6), resolution=resolution)
    assert mesh.euler_characteristic() == 2
    assert mesh.is_watertight()
    radius_error = np.abs(np.linalg.norm(mesh.vertices, axis=1) - 0.6)
    assert radius_error.max() < 2 * (2.0 / resolution)


def test_surface_touching_the_boundary_still_closes():
    mesh = marching_cubes(smooth_sphere(1.2), resolution=16)
    assert not mesh.is_empty
    assert np.abs(mesh.vertices).max() > 1.0
    assert np.abs(mesh.vertices).max() <= 1.0 + 2.0 / 15


def test_empty_field_gives_empty_mesh():
    mesh = marching_cubes(lambda points: np.zeros(len(points)), resolution=8)
    assert mesh.is_empty and mesh.n_vertices == 0


def test_marching_cubes_argument_checks():
    with pytest.raises(ValueError):
        marching_cubes(smooth_sphere(0.5), resolution=4)
    with pytest.raises(ValueError):
        mesh_from_grid(np.zeros((8, 8, 9)))


def test_marching_cubes_accepts_fields_and_scenes(sphere_scene):
    field_mesh = marching_cubes(AnalyticField(sphere_scene, softness=0.05), resolution=16, workers=2)
    scene_mesh = marching_cubes(sphere_scene, resolution=16)
    assert not field_mesh.is_empty and not scene_mesh.is_empty


def test_p2s_of_own_surface_samples_is_zero(sphere_mesh):
    points = sphere_mesh.sample_surface(500, make_stream(0, 'p2s'))
    assert metric_p2s(sphere_mesh, points) == pytest.approx(0.0, abs=1e-9)


def test_p2s_of_concentric_sphere(sphere_mesh):
    directions = make_stream(1, 'p2s').normal(size=(400, 3))
    points = 0.6 * directions / np.linalg.norm(directions, axis=1, keepdims=True)
    assert metric_p2s(sphere_mesh, points, workers=2) == pytest.approx(0.1, abs=0.01)


def test_mesh_distances_match_brute_force():
    mesh = marching_cubes(smooth_sphere(0.5), resolution=10)
    points = make_stream(2, 'p2s').uniform(-1, 1, size=(60, 3))
    brute = point_triangle_distances(points, mesh.corners()).min(axis=1)
    np.testing.assert_allclose(mesh_distances(mesh, points, chunk=16), brute, atol=1e-12)


def test_point_triangle_distance_regions():
    triangle = np.array([[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]])
    points = np.array([[0.2, 0.2, 0.5], [-1.0, -1.0, 0.0], [0.5, -2.0, 0.0], [1.0, 1.0, 0.0]])
    expected = [0.5, np.sqrt(2.0), 2.0, np.sqrt(0.5)]
    np.testing.assert_allclose(point_triangle_distances(points, triangle)[:, 0], expected, atol=1e-12)


def test_metrics_on_empty_inputs(sphere_mesh):
    assert metric_p2s(TriMesh.empty(), np.zeros((3, 3))) == EMPTY_DISTANCE
    assert metric_p2s(sphere_mesh, np.zeros((0, 3))) == EMPTY_DISTANCE
    assert metric_chamfer(TriMesh.empty(), sphere_mesh) == EMPTY_DISTANCE


def test_chamfer_of_identical_meshes_is_zero(sphere_mesh):
    assert metric_chamfer(sphere_mesh, sphere_mesh, n_samples=500) == 0.0


def test_chamfer_is_symmetric(sphere_mesh):
    other = marching_cubes(smooth_sphere(0.4), resolution=24)
    assert metric_chamfer(sphere_mesh, other, 800) == metric_chamfer(other, sphere_mesh, 800)
    assert metric_chamfer(sphere_mesh, other, 800) == pytest.approx(0.1, abs=0.02)


def test_chamfer_under_small_translation(sphere_mesh):
    shifted = sphere_mesh.transformed(offset=(0.01, 0.0, 0.0))
    distance = metric_chamfer(sphere_mesh, shifted, n_samples=1000)
    assert 0.0 < distance <= 0.01 + 1e-9


def test_constant_color_field(sphere_mesh):
    colored = vertex_colors(sphere_mesh, lambda points: np.tile([0.2, 0.4, 0.6], (len(points), 1)))
    np.testing.assert_allclose(colored.colors, np.tile([0.2, 0.4, 0.6], (sphere_mesh.n_vertices, 1)))
    np.testing.assert_array_equal(colored.triangles, sphere_mesh.triangles)


def test_vertex_colors_from_field_payload(sphere_scene, sphere_mesh):
    colored = vertex_colors(sphere_mesh, AnalyticField(sphere_scene), payload='final', chunk=100, workers=2)
    np.testing.assert_allclose(colored.colors, np.tile([1.0, 0.0, 0.0], (sphere_mesh.n_vertices, 1)))
    with pytest.raises(ValueError):
        vertex_colors(TriMesh.empty(), AnalyticField(sphere_scene))


def test_trimesh_validation():
    with pytest.raises(ValueError):
        TriMesh(np.zeros((3, 3)), [[0, 1, 3]])
    with pytest.raises(ValueError):
        TriMesh(np.zeros((3, 3)), [[0, 1, 2]], colors=np.zeros((2, 3)))


def quad():
    vertices = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.25]]
    return TriMesh(vertices, [[0, 1, 2], [0, 2, 3]],
                   colors=[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.5, 0.5, 0.5]])


@pytest.mark.parametrize('fmt', ['obj', 'ply'])
def test_mesh_file_preserves_winding_and_colors(tmp_path, fmt):
    mesh = quad()
    loaded = load_mesh(export_mesh(mesh, str(tmp_path / 'out' / f"quad.{fmt}")))
    np.testing.assert_array_equal(loaded.triangles, mesh.triangles)
    np.testing.assert_allclose(loaded.vertices, mesh.vertices, atol=1e-6)
    np.testing.assert_allclose(loaded.colors, mesh.colors, atol=1.0 / 255)


@pytest.mark.parametrize('fmt', ['obj', 'ply'])
def test_uncolored_and_empty_mesh_files(tmp_path, fmt):
    plain = load_mesh(export_mesh(TriMesh(quad().vertices, quad().triangles), str(tmp_path / f"plain.{fmt}")))
    assert plain.colors is None
    empty = load_mesh(export_mesh(TriMesh.empty(), str(tmp_path / f"empty.{fmt}")))
    assert empty.is_empty and empty.n_vertices == 0


def test_mesh_format_errors(tmp_path):
    with pytest.raises(ValueError):
        export_mesh(quad(), str(tmp_path / 'quad.stl'))
    (tmp_path / 'bad.ply').write_bytes(b'not a mesh')
    with pytest.raises(ValueError):
        load_mesh(str(tmp_path / 'bad.ply'))
