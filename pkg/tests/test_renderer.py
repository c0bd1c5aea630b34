import numpy as np
import pytest
from scipy import stats

from occufield.conditioning.camera import Camera
from occufield.diffcore import ops
from occufield.diffcore.gradcheck import grad_check
from occufield.diffcore.rng import make_stream
from occufield.diffcore.tensor import ShapeError, Tensor
from occufield.renderer import (WarpField, composite, gen_rays, importance_resample, read_warp, render_mask,
                                render_rays, render_view, render_warp_field, stratified_sample, write_warp)
from occufield.renderer.compositing import transmittance
from occufield.renderer.render import mask_from_alpha
from occufield.renderer.sampling import sample_pdf
from occufield.synth.oracle import AnalyticField, EmptyField


def test_center_ray_of_front_camera():
    camera = Camera.orbit(0.0, image_size=(15, 15))
    rays = gen_rays(camera, np.array([[7, 7]]))
    np.testing.assert_allclose(rays.directions[0], [0.0, 0.0, -1.0])
    np.testing.assert_allclose(rays.origins[0], [0.0, 0.0, 1.0])
    assert rays.far[0] - rays.near[0] == pytest.approx(2.0)
    assert rays.valid[0]


def test_rays_share_direction_and_are_unit(front_camera):
    rays = gen_rays(Camera.orbit(37.0, image_size=(8, 8)))
    np.testing.assert_allclose(rays.directions, np.broadcast_to(rays.directions[0], rays.directions.shape))
    np.testing.assert_allclose(np.linalg.norm(rays.directions, axis=1), 1.0, atol=1e-9)
    assert np.all(rays.near < rays.far)
    assert len(gen_rays(front_camera)) == 256


def test_rays_outside_the_cube_are_invalid():
    camera = Camera.orbit(0.0, image_size=(5, 5), half_extent=2.0)
    rays = gen_rays(camera)
    assert not rays.valid[0]
    assert rays.valid[12]


def test_gen_rays_rejects_out_of_image_pixels(front_camera):
    with pytest.raises(ValueError):
        gen_rays(front_camera, np.array([[16, 0]]))


def test_composite_single_opaque_sample():
    rendered, weights, _ = composite(np.array([[1.0]]), np.array([[[0.2, 0.4, 0.6]]]))
    np.testing.assert_allclose(rendered.data, [[0.2, 0.4, 0.6]])
    np.testing.assert_allclose(weights.data, [[1.0]])


def test_composite_transparent_samples():
    rendered, weights, trans = composite(np.zeros((1, 4)), np.ones((1, 4, 3)))
    np.testing.assert_allclose(rendered.data, 0.0)
    np.testing.assert_allclose(weights.data, 0.0)
    np.testing.assert_allclose(trans.data, 1.0)


def test_composite_two_half_transparent_samples():
    rendered, weights, _ = composite(np.array([[0.5, 0.5]]), np.array([[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]]))
    np.testing.assert_allclose(rendered.data, [[0.5, 0.25, 0.0]])
    np.testing.assert_allclose(weights.data, [[0.5, 0.25]])


def test_composite_weight_identity():
    alphas = make_stream(0, 'alphas').random((6, 9))
    _, weights, trans = composite(alphas, np.ones((6, 9, 1)))
    expected = alphas * np.concatenate([np.ones((6, 1)), np.cumprod(1.0 - alphas, axis=1)[:, :-1]], axis=1)
    np.testing.assert_allclose(weights.data, expected, atol=1e-12)
    np.testing.assert_allclose(weights.data.sum(axis=1) + trans.data[:, -1], 1.0, atol=1e-12)
    assert trans.data[0, 0] == 1.0


def test_composite_depends_on_sample_order():
    alphas = np.array([[0.7, 0.2]])
    payload = np.array([[[1.0], [0.0]]])
    forward, _, _ = composite(alphas, payload)
    reverse, _, _ = composite(alphas[:, ::-1], payload[:, ::-1])
    assert forward.data[0, 0] != pytest.approx(reverse.data[0, 0])


def test_composite_shape_mismatch():
    with pytest.raises(ShapeError):
        composite(np.zeros((2, 3)), np.zeros((2, 4, 1)))


def test_transmittance_gradient_check():
    alphas = Tensor(make_stream(1, 'trans').random((2, 4)))
    projection = Tensor(make_stream(2, 'trans').normal(size=(2, 5)))
    assert grad_check(lambda a: (transmittance(a) * projection).sum(), [alphas]) < 1e-4


def test_single_stratified_sample_in_interval():
    depth = stratified_sample(np.array([0.5]), np.array([1.5]), 1, make_stream(0, 'strat'))
    assert depth.shape == (1, 1)
    assert 0.5 <= depth[0, 0] <= 1.5


def test_stratified_samples_stay_in_their_bins():
    near, far, count = np.zeros(1000), np.full(1000, 2.0), 8
    depths = stratified_sample(near, far, count, make_stream(1, 'strat'))
    edges = np.linspace(0.0, 2.0, count + 1)
    assert np.all(depths > edges[:-1]) and np.all(depths < edges[1:])


def test_stratified_mean_is_bin_midpoint():
    n = 10000
    depths = stratified_sample(np.zeros(n), np.ones(n), 1, make_stream(2, 'strat'))[:, 0]
    sigma = np.sqrt(1.0 / 12.0)
    assert abs(depths.mean() - 0.5) < 3.0 * sigma / np.sqrt(n)


def test_stratified_without_rng_uses_midpoints():
    np.testing.assert_allclose(stratified_sample(np.array([0.0]), np.array([1.0]), 4), [[0.125, 0.375, 0.625, 0.875]])
    with pytest.raises(ValueError):
        stratified_sample(np.array([0.0]), np.array([1.0]), 0)


def test_importance_samples_follow_single_bin():
    weights = np.zeros((1, 8))
    weights[0, 3] = 1.0
    fine = sample_pdf(np.array([0.0]), np.array([1.0]), weights, 64, make_stream(3, 'pdf'))
    assert np.all((fine >= 3.0 / 8.0) & (fine <= 4.0 / 8.0))


def test_importance_samples_uniform_weights():
    fine = sample_pdf(np.array([0.0]), np.array([1.0]), np.ones((1, 16)), 10000, make_stream(4, 'pdf'))[0]
    assert stats.kstest(fine, 'uniform').statistic < 0.05


def test_importance_resample_merges_and_sorts():
    coarse = stratified_sample(np.zeros(3), np.ones(3), 6, make_stream(5, 'pdf'))
    weights = make_stream(6, 'pdf').random((3, 6))
    merged = importance_resample(coarse, weights, 5, make_stream(7, 'pdf'), near=np.zeros(3), far=np.ones(3))
    assert merged.shape == (3, 11)
    assert np.all(np.diff(merged, axis=1) >= 0)
    for r in range(3):
        assert set(np.round(coarse[r], 12)) <= set(np.round(merged[r], 12))


def test_importance_resample_zero_count_is_identity():
    coarse = stratified_sample(np.zeros(2), np.ones(2), 4)
    np.testing.assert_array_equal(importance_resample(coarse, np.ones((2, 4)), 0), coarse)
    with pytest.raises(ValueError):
        importance_resample(coarse, np.ones((2, 4)), -1)


def test_empty_field_renders_black(front_camera):
    view = render_view(EmptyField(), front_camera, payloads=('final',))
    np.testing.assert_array_equal(view.alpha, 0.0)
    np.testing.assert_array_equal(view.rgb, 0.0)
    assert not render_mask(EmptyField(), front_camera).any()


def test_opaque_sphere_center_and_corner(sphere_scene):
    camera = Camera.orbit(0.0, image_size=(15, 15))
    view = render_view(AnalyticField(sphere_scene), camera, payloads=('final', 'color'),
                       rng=make_stream(0, 'render'))
    np.testing.assert_allclose(view.rgb[7, 7], [1.0, 0.0, 0.0], atol=1e-12)
    assert view.alpha[0, 0] == pytest.approx(0.0)
    assert view.channels['color'].shape == (15, 15, 3)


def test_sphere_mask_area(sphere_scene):
    size = 64
    mask = render_mask(AnalyticField(sphere_scene), Camera.orbit(0.0, image_size=(size, size)))
    radius_px = 0.5 * (size - 1) / 2.0
    expected = np.pi * radius_px ** 2
    assert abs(mask.sum() - expected) < 0.05 * expected


def test_mask_is_monotone_in_threshold(sphere_scene, front_camera):
    alpha = render_view(AnalyticField(sphere_scene, softness=0.05), front_camera, payloads=()).alpha
    previous = None
    for threshold in (0.1, 0.3, 0.5, 0.7, 0.9):
        mask = mask_from_alpha(alpha, threshold)
        if previous is not None:
            assert np.all(mask <= previous)
        previous = mask


def test_hierarchical_render_matches_dense_render(sphere_scene):
    camera = Camera.orbit(0.0, image_size=(24, 24))
    field = AnalyticField(sphere_scene)
    coarse = render_view(field, camera, payloads=('final',))
    dense = render_view(field, camera, payloads=('final',), n_coarse=1024, n_fine=0)
    foreground = dense.alpha > 0.5
    close = np.abs(coarse.rgb - dense.rgb).max(axis=-1) < 2.0 / 255.0
    assert close[foreground].mean() >= 0.95


def test_render_view_is_independent_of_workers(sphere_scene, front_camera):
    field = AnalyticField(sphere_scene, softness=0.05)
    one = render_view(field, front_camera, rng=make_stream(1, 'render'), chunk=50, workers=1)
    many = render_view(field, front_camera, rng=make_stream(1, 'render'), chunk=50, workers=4)
    np.testing.assert_array_equal(one.rgb, many.rgb)


def test_render_rays_unknown_payload(sphere_scene, front_camera):
    with pytest.raises(KeyError):
        render_rays(AnalyticField(sphere_scene), gen_rays(front_camera, np.array([[0, 0]])), ('gamma',))


def test_render_rays_gradient_check():
    rays = gen_rays(Camera.orbit(0.0, image_size=(3, 3)), np.array([[0, 1], [1, 1], [2, 0]]))
    rng = make_stream(8, 'render-grad')
    w_alpha = Tensor(rng.normal(size=(3, 1)))
    w_color = Tensor(rng.normal(size=(3, 3)))
    projection = Tensor(rng.normal(size=(3, 3)))

    def loss(wa, wc):
        def field(points):
            alpha = ops.sigmoid(ops.reshape(ops.matmul(Tensor(points), wa), (points.shape[0],)))
            return alpha, {'final': ops.sigmoid(ops.matmul(Tensor(points), wc))}
        rendered = render_rays(field, rays, ('final',), n_coarse=4, n_fine=0)
        return (rendered['final'] * projection).sum() + rendered['alpha'].sum()

    assert grad_check(loss, [w_alpha, w_color]) < 1e-4


def test_warp_field_mirrors_front_to_back(sphere_scene):
    source = Camera.orbit(0.0, image_size=(15, 15))
    target = Camera.orbit(180.0, image_size=(15, 15))
    warp = render_warp_field(AnalyticField(sphere_scene), source, target, rng=make_stream(2, 'warp'))
    assert warp.valid[7, 7]
    np.testing.assert_allclose(warp.coords[7, 7], [0.0, 0.0], atol=1e-9)

    rows, cols = np.nonzero(warp.valid)
    uv = target.pixel_to_uv(rows, cols)
    spacing = 2.0 / 24
    expected = np.stack([-uv[:, 0], uv[:, 1]], axis=1)
    assert np.abs(warp.coords[rows, cols] - expected).max() < 2.0 * spacing
    assert not warp.valid[0, 0]


def test_warp_field_of_empty_field_is_invalid(front_camera, back_camera):
    warp = render_warp_field(EmptyField(), front_camera, back_camera)
    assert not warp.valid.any()
    np.testing.assert_array_equal(warp.coords, 0.0)


def test_warp_file(tmp_path):
    rng = make_stream(3, 'warp')
    warp = WarpField(rng.uniform(-1, 1, size=(4, 6, 2)), rng.random((4, 6)) > 0.5)
    loaded = read_warp(write_warp(str(tmp_path / 'warp.bin'), warp))
    np.testing.assert_allclose(loaded.coords, warp.coords, atol=1e-6)
    np.testing.assert_array_equal(loaded.valid, warp.valid)
    assert (loaded.width, loaded.height) == (6, 4)

    blob = open(tmp_path / 'warp.bin', 'rb').read()
    (tmp_path / 'short.bin').write_bytes(blob[:-3])
    with pytest.raises(ValueError):
        read_warp(str(tmp_path / 'short.bin'))
    with pytest.raises(ValueError):
        WarpField(np.zeros((4, 6, 2)), np.zeros((4, 5), dtype=bool))
