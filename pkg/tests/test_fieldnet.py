import numpy as np
import pytest

from occufield.conditioning.proxy import voxelize_proxy
from occufield.diffcore.gradcheck import grad_check
from occufield.diffcore.rng import make_stream
from occufield.diffcore.tensor import ShapeError, Tensor
from occufield.fieldnet import (FieldBundle, FieldNetwork, composite_color_fusion, composite_color_initial,
                                encoded_size, field_eval, gamma_visualization, positional_encode)
from occufield.synth.render_gt import render_gt

TINY = dict(widths=(8, 8), frequencies=2)


def test_positional_encoding_size():
    assert encoded_size(6) == 39
    assert positional_encode(np.zeros((4, 3)), 6).shape == (4, 39)
    assert positional_encode(np.zeros(3), 0).shape == (1, 3)


def test_positional_encoding_values():
    encoded = positional_encode(np.array([[0.5, 0.0, -0.5]]), 1)[0]
    np.testing.assert_allclose(encoded, [0.5, 0.0, -0.5, 1.0, 0.0, -1.0, 0.0, 1.0, 0.0], atol=1e-12)


def test_positional_encoding_rejects_bad_input():
    with pytest.raises(ValueError):
        positional_encode(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        positional_encode(np.zeros((2, 3)), -1)


def test_zero_head_gives_half_everywhere():
    rng = make_stream(0, 'field')
    network = FieldNetwork(4, rng, zero_head=True, **TINY)
    out = field_eval(network, rng.uniform(-1, 1, size=(6, 3)), Tensor(rng.normal(size=(6, 4))))
    np.testing.assert_allclose(out.alpha.data, 0.5)
    np.testing.assert_allclose(out.color.data, 0.5)
    np.testing.assert_allclose(out.gamma.data, 0.5)


def test_fusion_zero_head_gives_uniform_gamma():
    rng = make_stream(0, 'field')
    network = FieldNetwork(4, rng, fusion=True, zero_head=True, **TINY)
    out = network(np.zeros((3, 3)), Tensor(np.ones((3, 4))))
    assert out.gamma.shape == (3, 3)
    np.testing.assert_allclose(out.gamma.data, 1.0 / 3.0)


def test_outputs_in_range_and_gamma_on_simplex():
    rng = make_stream(1, 'field')
    network = FieldNetwork(5, rng, fusion=True, **TINY)
    out = network(rng.uniform(-1, 1, size=(20, 3)), Tensor(rng.normal(size=(20, 5))))
    assert np.all((out.alpha.data > 0) & (out.alpha.data < 1))
    assert np.all((out.color.data > 0) & (out.color.data < 1))
    np.testing.assert_allclose(out.gamma.data.sum(axis=1), 1.0)


def test_batch_equals_per_point_evaluation():
    rng = make_stream(2, 'field')
    network = FieldNetwork(3, rng, **TINY)
    points = rng.uniform(-1, 1, size=(5, 3))
    conditions = rng.normal(size=(5, 3))
    batch = network(points, Tensor(conditions))
    for i in range(5):
        single = network(points[i], Tensor(conditions[i:i + 1]))
        assert single.alpha.data[0] == pytest.approx(batch.alpha.data[i], abs=1e-12)
        np.testing.assert_allclose(single.color.data[0], batch.color.data[i], atol=1e-12)


def test_condition_shape_mismatch():
    rng = make_stream(3, 'field')
    network = FieldNetwork(3, rng, **TINY)
    with pytest.raises(ShapeError):
        network(np.zeros((2, 3)), Tensor(np.zeros((2, 4))))
    with pytest.raises(ShapeError):
        network(np.zeros((2, 3)), Tensor(np.zeros((3, 3))))


def test_non_finite_weights_are_rejected():
    rng = make_stream(3, 'field')
    network = FieldNetwork(3, rng, **TINY)
    network.head.weight.data[0, 0] = np.nan
    with pytest.raises(ValueError):
        network(np.zeros((1, 3)), Tensor(np.zeros((1, 3))))


def test_network_rejects_bad_widths():
    with pytest.raises(ValueError):
        FieldNetwork(3, make_stream(0, 'field'), widths=(8, 0))


def test_field_gradient_check():
    rng = make_stream(4, 'field')
    network = FieldNetwork(4, rng, widths=(6, 6), frequencies=2, fusion=True)
    points = rng.uniform(-1, 1, size=(3, 3))
    conditions = Tensor(rng.normal(size=(3, 4)))
    projection = rng.normal(size=(3, 7))

    def loss(cond, weight):
        out = network(points, cond)
        return ((out.color * Tensor(projection[:, :3])).sum() + (out.alpha * Tensor(projection[:, 3])).sum()
                + (out.gamma * Tensor(projection[:, 4:])).sum())

    assert grad_check(loss, [conditions, network.head.weight]) < 1e-4


def test_initial_blend():
    gamma = Tensor([0.0, 1.0, 0.25])
    pred = Tensor(np.tile([1.0, 0.0, 0.0], (3, 1)))
    source = Tensor(np.tile([0.0, 0.0, 1.0], (3, 1)))
    out = composite_color_initial(gamma, pred, source).data
    np.testing.assert_allclose(out, [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.75, 0.0, 0.25]])


def test_fusion_blend_selects_by_one_hot_gamma():
    pred = Tensor([[1.0, 0.0, 0.0]] * 3)
    source = Tensor([[0.0, 1.0, 0.0]] * 3)
    back = Tensor([[0.0, 0.0, 1.0]] * 3)
    gamma = Tensor(np.eye(3))
    out = composite_color_fusion(gamma, pred, source, back).data
    np.testing.assert_allclose(out, [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
    with pytest.raises(ShapeError):
        composite_color_fusion(Tensor(np.ones((3, 2))), pred, source, back)


def test_gamma_visualization_channels():
    np.testing.assert_allclose(gamma_visualization(np.array([0.25])), [[0.75, 0.25, 0.0]])
    np.testing.assert_allclose(gamma_visualization(np.array([[0.2, 0.3, 0.5]])), [[0.5, 0.2, 0.3]])


def _bind(fusion, sphere_scene, front_camera, back_camera):
    rng = make_stream(5, 'bundle')
    bundle = FieldBundle(rng, fusion=fusion, image_channels=(4, 4), image_strides=(2, 2),
                         volume_channels=(3,), **TINY)
    image, _ = render_gt(sphere_scene, front_camera)
    back, _ = render_gt(sphere_scene, back_camera)
    proxy = voxelize_proxy(sphere_scene, res=8, inflation=0.1)
    if fusion:
        return bundle.bind(image, proxy, front_camera, back, back_camera)
    return bundle.bind(image, proxy, front_camera)


@pytest.mark.parametrize('fusion', [False, True])
def test_bound_field_payloads(fusion, sphere_scene, front_camera, back_camera):
    field = _bind(fusion, sphere_scene, front_camera, back_camera)
    alpha, payloads = field(np.zeros((4, 3)))
    assert alpha.shape == (4,)
    assert payloads['color'].shape == (4, 3)
    assert payloads['final'].shape == (4, 3)
    assert payloads['gamma'].shape == (4, 3 if fusion else 1)


def test_fusion_bundle_requires_backside(sphere_scene, front_camera):
    bundle = FieldBundle(make_stream(0, 'bundle'), fusion=True, image_channels=(4,), image_strides=(2,),
                         volume_channels=(3,), **TINY)
    image, _ = render_gt(sphere_scene, front_camera)
    with pytest.raises(ValueError):
        bundle.bind(image, voxelize_proxy(sphere_scene, res=8), front_camera)


def test_bound_field_source_sample_is_image_color(sphere_scene, front_camera, back_camera):
    field = _bind(False, sphere_scene, front_camera, back_camera)
    result = field.query(np.array([[0.0, 0.0, 0.4]]))
    np.testing.assert_allclose(result.source_rgb, [[1.0, 0.0, 0.0]])
