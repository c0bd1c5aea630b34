import numpy as np
import pytest

from occufield.diffcore import ops
from occufield.diffcore.checkpoint import load_checkpoint
from occufield.diffcore.gradcheck import grad_check
from occufield.diffcore.rng import make_stream
from occufield.diffcore.tensor import ShapeError, Tensor, no_grad
from occufield.losses.loss_log import read_loss_log
from occufield.refine import (Discriminator, FeaturePyramid, RefineGenerator, RefinePair, ResidualBlock,
                              SourceEncoder, StyleBlock, encode_source, refine_forward, resample_warp,
                              resize_mask, standardize, style_block, train_refiner, warp_features)
from occufield.refine.trainer import DISCRIMINATOR_RATIO, GENERATOR_RATIO
from occufield.refine.warping import target_grid
from occufield.renderer.warp import WarpField

SIZE = 16
TINY = (4, 4, 4, 4)


def identity_warp(height, width, valid=True):
    coords = target_grid(height, width).reshape(height, width, 2)
    return WarpField(coords, np.full((height, width), valid))


def mirror_warp(height, width):
    coords = target_grid(height, width).reshape(height, width, 2) * np.array([-1.0, 1.0])
    return WarpField(coords, np.ones((height, width), dtype=bool))


def make_pair(seed=0, scene_id='0000'):
    rng = make_stream(seed, 'pair')
    mask = np.zeros((SIZE, SIZE), dtype=bool)
    mask[3:13, 4:12] = True
    target = np.zeros((SIZE, SIZE, 3))
    target[mask] = (0.8, 0.3, 0.2)
    target[mask & (np.arange(SIZE)[:, None] % 4 < 2)] = (0.2, 0.3, 0.8)
    coarse = np.clip(target + rng.normal(0.0, 0.1, target.shape), 0.0, 1.0) * mask[..., None]
    source = rng.random((SIZE, SIZE, 3))
    return RefinePair(source=source, coarse=coarse, warp=mirror_warp(SIZE, SIZE), target=target,
                      mask=mask, scene_id=scene_id)


def test_source_encoder_scales_halve():
    encoder = SourceEncoder(make_stream(0, 'enc'), channels=(4, 5, 6))
    features = encode_source(make_stream(1, 'img').random((3, SIZE, SIZE)), encoder)
    assert [f.shape for f in features] == [(1, 4, 16, 16), (1, 5, 8, 8), (1, 6, 4, 4)]
    assert encoder.scales == 3 and encoder.total_stride == 4


def test_source_encoder_zero_image_gives_zero_features():
    encoder = SourceEncoder(make_stream(0, 'enc'), channels=(4, 4))
    for name, param in encoder.named_parameters().items():
        if name.endswith('bias'):
            param.data[:] = 0.0
    for features in encoder(np.zeros((3, 8, 8))):
        np.testing.assert_array_equal(features.data, 0.0)


def test_source_encoder_rejects_indivisible_size():
    encoder = SourceEncoder(make_stream(0, 'enc'), channels=(4, 4, 4))
    with pytest.raises(ShapeError):
        encoder(np.zeros((3, 10, 10)))


def test_residual_block_gradient_check():
    rng = make_stream(2, 'res')
    block = ResidualBlock(2, 3, rng, stride=2)
    x = Tensor(rng.normal(size=(1, 2, 4, 4)))
    projection = Tensor(rng.normal(size=(1, 3, 2, 2)))
    assert grad_check(lambda inp, w: (block(inp) * projection).sum(), [x, block.conv1.weight]) < 1e-4


def test_identity_warp_reproduces_features():
    features = make_stream(3, 'warp').normal(size=(2, 5, 6))
    warped = warp_features(features, identity_warp(5, 6))
    np.testing.assert_allclose(warped.data, features, atol=1e-9)


def test_mirror_warp_undoes_mirrored_features():
    features = make_stream(4, 'warp').normal(size=(2, 5, 6))
    warped = warp_features(features[:, :, ::-1].copy(), mirror_warp(5, 6))
    np.testing.assert_allclose(warped.data, features, atol=1e-9)


def test_invalid_warp_gives_zero_features():
    features = make_stream(5, 'warp').normal(size=(1, 3, 4, 4))
    warped = warp_features(features, identity_warp(4, 4, valid=False))
    assert warped.shape == (1, 3, 4, 4)
    np.testing.assert_array_equal(warped.data, 0.0)


def test_warping_is_linear():
    rng = make_stream(6, 'warp')
    f, g = rng.normal(size=(2, 2, 8, 8))
    warp = WarpField(rng.uniform(-1, 1, size=(8, 8, 2)), rng.random((8, 8)) > 0.3)
    combined = warp_features(2.0 * f - 3.0 * g, warp).data
    separate = 2.0 * warp_features(f, warp).data - 3.0 * warp_features(g, warp).data
    np.testing.assert_allclose(combined, separate, atol=1e-12)


def test_warp_resampled_to_coarser_grid():
    coords, valid = resample_warp(identity_warp(16, 16), 4, 4)
    assert valid.all()
    np.testing.assert_allclose(coords, target_grid(4, 4), atol=1e-12)

    half = identity_warp(16, 16)
    half.valid[:, :8] = False
    _, valid = resample_warp(half, 4, 4)
    np.testing.assert_array_equal(valid.reshape(4, 4)[:, 0], False)
    np.testing.assert_array_equal(valid.reshape(4, 4)[:, -1], True)


def test_warp_features_gradient_check():
    rng = make_stream(7, 'warp')
    features = Tensor(rng.normal(size=(2, 4, 4)))
    warp = WarpField(rng.uniform(-0.9, 0.9, size=(4, 4, 2)), np.ones((4, 4), dtype=bool))
    projection = Tensor(rng.normal(size=(2, 4, 4)))
    assert grad_check(lambda f: (warp_features(f, warp) * projection).sum(), [features]) < 1e-4


def test_standardization_statistics():
    rng = make_stream(8, 'style')
    block = StyleBlock(3, 4, 2, rng)
    out = standardize(block.modulate(rng.normal(size=(1, 3, 8, 8)), rng.normal(size=(1, 2, 8, 8)))).data
    np.testing.assert_allclose(out.mean(axis=(2, 3)), 0.0, atol=1e-9)
    np.testing.assert_allclose(out.std(axis=(2, 3)), 1.0, atol=1e-6)


def test_zero_noise_and_bias_give_standardized_output():
    rng = make_stream(9, 'style')
    block = StyleBlock(3, 4, 2, rng, upsample=True)
    features, condition = rng.normal(size=(1, 3, 4, 4)), rng.normal(size=(1, 2, 4, 4))
    out = style_block(features, condition, block, make_stream(0, 'noise'))
    assert out.shape == (1, 4, 8, 8)
    np.testing.assert_array_equal(out.data, standardize(block.modulate(features, condition)).data)


def test_noise_scales_per_channel():
    rng = make_stream(10, 'style')
    block = StyleBlock(2, 2, 2, rng)
    block.noise_strength.data[:] = [0.0, 1.0]
    features, condition = rng.normal(size=(1, 2, 4, 4)), rng.normal(size=(1, 2, 4, 4))
    clean = block(features, condition).data
    noisy = block(features, condition, make_stream(1, 'noise')).data
    np.testing.assert_array_equal(noisy[:, 0], clean[:, 0])
    assert not np.allclose(noisy[:, 1], clean[:, 1])


def test_constant_condition_is_global_affine():
    rng = make_stream(11, 'style')
    block = StyleBlock(3, 2, 2, rng)
    features = rng.normal(size=(1, 3, 5, 5))
    c = np.array([0.4, -1.2])
    condition = np.broadcast_to(c[None, :, None, None], (1, 2, 5, 5)).copy()
    scale = block.to_alpha.weight.data[:, :, 0, 0] @ c + block.to_alpha.bias.data
    shift = block.to_beta.weight.data[:, :, 0, 0] @ c + block.to_beta.bias.data
    direct = features * scale[None, :, None, None] + shift[None, :, None, None]
    expected = ops.conv(direct, block.conv.weight, block.conv.bias, padding=1).data
    np.testing.assert_allclose(block.modulate(features, condition).data, expected, atol=1e-12)


def test_style_block_gradient_check():
    rng = make_stream(12, 'style')
    block = StyleBlock(2, 3, 2, rng, upsample=True)
    features = Tensor(rng.normal(size=(1, 2, 3, 3)))
    condition = Tensor(rng.normal(size=(1, 2, 3, 3)))
    projection = Tensor(rng.normal(size=(1, 3, 6, 6)))

    def loss(f, cond, weight, bias):
        return (block(f, cond) * projection).sum()

    assert grad_check(loss, [features, condition, block.conv.weight, block.bias]) < 1e-4


def test_style_block_shape_checks():
    block = StyleBlock(2, 3, 2, make_stream(0, 'style'))
    with pytest.raises(ShapeError):
        block(np.zeros((1, 3, 4, 4)), np.zeros((1, 2, 4, 4)))
    with pytest.raises(ShapeError):
        block(np.zeros((1, 2, 4, 4)), np.zeros((1, 2, 2, 2)))


def test_resize_mask_box_filter():
    mask = np.zeros((4, 4))
    mask[:2, :2] = 1.0
    mask[2, 2] = 1.0
    np.testing.assert_allclose(resize_mask(mask, 2, 2), [[1.0, 0.0], [0.0, 0.25]])
    with pytest.raises(ShapeError):
        resize_mask(mask, 3, 3)


def test_feature_pyramid_levels_keep_resolution():
    rng = make_stream(0, 'pyramid')
    pyramid = FeaturePyramid((3, 5), (4, 6), rng)
    warped = [Tensor(rng.normal(size=(3, 8, 8))), Tensor(rng.normal(size=(5, 4, 4)))]
    levels = pyramid(warped, np.ones((8, 8)))
    assert [level.shape for level in levels] == [(1, 4, 8, 8), (1, 6, 4, 4)]
    with pytest.raises(ShapeError):
        pyramid(warped[:1], np.ones((8, 8)))
    with pytest.raises(ValueError):
        FeaturePyramid((3,), (4, 6), rng)


def test_refined_image_shape_and_range():
    pair = make_pair()
    generator = RefineGenerator(make_stream(0, 'gen'), channels=TINY)
    source, coarse, _ = pair.tensors()
    with no_grad():
        refined = refine_forward(generator, coarse, source, pair.warp, pair.mask).data
    assert refined.shape == (3, SIZE, SIZE)
    assert np.all((refined > 0.0) & (refined < 1.0))


def test_refinement_is_deterministic_with_fixed_noise_seed():
    pair = make_pair()
    source, coarse, _ = pair.tensors()
    outputs = []
    for _ in range(2):
        generator = RefineGenerator(make_stream(0, 'gen'), channels=TINY)
        for block, _ in generator.schedule:
            block.noise_strength.data[:] = 0.5
        with no_grad():
            outputs.append(generator(coarse, source, pair.warp, pair.mask, make_stream(3, 'noise')).data)
    np.testing.assert_array_equal(outputs[0], outputs[1])


def test_generator_input_checks():
    generator = RefineGenerator(make_stream(0, 'gen'), channels=TINY)
    size = 12
    image = np.zeros((3, size, size))
    with pytest.raises(ShapeError):
        generator(image, image, identity_warp(size, size), np.ones((size, size)))
    with pytest.raises(ShapeError):
        generator(np.zeros((3, 16, 16)), np.zeros((3, 16, 16)), identity_warp(8, 8), np.ones((16, 16)))


def test_discriminator_logit():
    discriminator = Discriminator(make_stream(0, 'disc'), channels=(4, 4, 4))
    logit = discriminator(np.zeros((3, 8, 8)), np.zeros((3, 8, 8)))
    assert logit.shape == (1,)
    with pytest.raises(ShapeError):
        discriminator(np.zeros((3, 6, 6)), np.zeros((3, 6, 6)))


def test_refine_pair_validation():
    pair = make_pair()
    with pytest.raises(ValueError):
        RefinePair(pair.source[:8], pair.coarse, pair.warp, pair.target, pair.mask)
    with pytest.raises(ValueError):
        RefinePair(pair.source, pair.coarse, identity_warp(8, 8), pair.target, pair.mask)


def test_l1_only_training_reduces_loss(tmp_path):
    generator = RefineGenerator(make_stream(0, 'gen'), channels=TINY)
    trainer = train_refiner([make_pair()], str(tmp_path), steps=40, generator=generator,
                            lambda_vgg=0.0, checkpoint_every=0, log_every=10)
    l1 = trainer.history['l1']
    assert len(l1) == 40
    assert np.mean(l1[-5:]) < np.mean(l1[:5])
    assert trainer.extractor is None
    assert all(value == 0.0 for value in trainer.history['perceptual'])
    np.testing.assert_allclose(trainer.history['total'], l1)

    frame = read_loss_log(str(tmp_path / 'loss_refine.csv'))
    assert set(frame['loss_name']) == {'l1', 'perceptual', 'total'}
    saved = load_checkpoint(trainer.checkpoint_path)
    assert any(name.startswith('refine/') for name in saved)


def test_refiner_training_resumes(tmp_path):
    pairs = [make_pair(0, '0000'), make_pair(1, '0001')]
    first = train_refiner(pairs, str(tmp_path), steps=3, channels=TINY, lambda_vgg=0.0)
    second = train_refiner(pairs, str(tmp_path), steps=5, channels=TINY, lambda_vgg=0.0)
    assert first.step == 3 and second.step == 5
    assert len(second.history['l1']) == 2
    frame = read_loss_log(str(tmp_path / 'loss_refine.csv'))
    assert sorted(frame['step'].unique()) == [0, 1, 2, 3, 4]


def test_gan_mode_trains_discriminator(tmp_path):
    trainer = train_refiner([make_pair()], str(tmp_path), steps=2, channels=TINY, gan=True)
    assert {'adversarial', 'discriminator', 'r1', 'perceptual'} <= set(trainer.history)
    saved = load_checkpoint(trainer.checkpoint_path)
    assert any(name.startswith('refine/disc/') for name in saved)
    assert 'adam/discriminator/step' in saved


def test_train_refiner_rejects_empty_dataset(tmp_path):
    with pytest.raises(ValueError):
        train_refiner([], str(tmp_path), steps=1)


def test_learning_rate_scales_both_optimizers(tmp_path):
    trainer = train_refiner([make_pair()], str(tmp_path), steps=1, channels=TINY, lambda_vgg=0.0,
                            gan=True, learning_rate=5e-3)
    assert trainer.generator_optimizer.state.learning_rate == pytest.approx(5e-3 * GENERATOR_RATIO)
    assert trainer.discriminator_optimizer.state.learning_rate == pytest.approx(5e-3 * DISCRIMINATOR_RATIO)
    with pytest.raises(ValueError):
        train_refiner([make_pair()], str(tmp_path / 'bad'), steps=1, channels=TINY, learning_rate=-1.0)
