import os

import numpy as np
import pytest

from occufield.app import EXIT_OK, EXIT_USAGE, main
from occufield.conditioning.camera import Camera
from occufield.diffcore.rng import make_stream
from occufield.pipeline import (EXPERIMENTS, RunConfig, cmd_experiment, cmd_synth_data, cmd_train_fusion,
                                cmd_train_initial, cmd_train_refine)
from occufield.pipeline.evaluation import (compositing_agreement, exterior_shell_alpha, exterior_shell_points,
                                           gamma_visibility_means, masked_l1, stripe_energy, visible_from)
from occufield.pipeline.experiments import (backside_stripes, run_determinism, run_fusion_comparison,
                                            run_gamma_sanity, run_initial_reconstruction, run_refine_comparison,
                                            run_vol_ablation)
from occufield.synth import AnalyticField, AnalyticScene, blob_scene, capsule_person, render_gt
from test_pipeline import tiny_config


def stripe_image(camera, frequency, low=0.1, high=0.9):
    rows, cols = np.meshgrid(np.arange(camera.height), np.arange(camera.width), indexing='ij')
    x = camera.pixel_to_uv(rows, cols)[..., 0]
    value = np.where(np.sin(frequency * x) >= 0.0, high, low)
    return np.repeat(value[..., None], 3, axis=-1)


def test_masked_l1_ignores_background():
    pred = np.zeros((4, 4, 3))
    target = np.zeros((4, 4, 3))
    target[0, 0] = 1.0
    pred[2, 2] = 0.3
    mask = np.zeros((4, 4), dtype=bool)
    mask[1:3, 1:3] = True
    assert masked_l1(pred, target, mask) == pytest.approx(0.075)
    with pytest.raises(ValueError):
        masked_l1(pred, target, np.zeros((4, 4), dtype=bool))


def test_exterior_shell_points_lie_in_shell(sphere_scene):
    points = exterior_shell_points(sphere_scene, 500, make_stream(0, 'shell'))
    assert points.shape == (500, 3)
    sdf = sphere_scene.sdf(points)
    assert sdf.min() >= 0.1 and sdf.max() <= 0.3
    with pytest.raises(ValueError):
        exterior_shell_points(sphere_scene, 10, make_stream(0, 'shell'), shell=(0.3, 0.1))


def test_exterior_shell_alpha_grows_with_diffused_occupancy(sphere_scene):
    def shell_alpha(softness):
        return exterior_shell_alpha(AnalyticField(sphere_scene, softness=softness), sphere_scene,
                                    make_stream(1, 'shell'), count=1000)

    assert shell_alpha(0.0) == 0.0
    assert 0.0 < shell_alpha(0.05) < shell_alpha(0.2)


def test_stripe_energy_peaks_at_texture_frequency():
    camera = Camera.orbit(0.0, image_size=(64, 64))
    image = stripe_image(camera, 12.0)
    mask = np.ones((64, 64), dtype=bool)
    x_axis = np.array([1.0, 0.0, 0.0])
    on_peak = stripe_energy(image, mask, camera, 12.0, x_axis)
    assert on_peak > 0.2
    assert on_peak > 3.0 * stripe_energy(image, mask, camera, 7.0, x_axis)
    assert stripe_energy(image, mask, camera, 12.0, np.array([0.0, 1.0, 0.0])) < 1e-9
    assert stripe_energy(np.full((64, 64, 3), 0.4), mask, camera, 12.0, x_axis) < 1e-12


def test_stripe_energy_is_linear_in_contrast():
    camera = Camera.orbit(0.0, image_size=(32, 32))
    image = stripe_image(camera, 10.0)
    mask = np.ones((32, 32), dtype=bool)
    axis = np.array([1.0, 0.0, 0.0])
    faded = 0.5 * image + 0.25
    assert stripe_energy(faded, mask, camera, 10.0, axis) == pytest.approx(
        0.5 * stripe_energy(image, mask, camera, 10.0, axis), rel=1e-9)
    with pytest.raises(ValueError):
        stripe_energy(image, np.zeros((32, 32), dtype=bool), camera, 10.0, axis)


def test_visible_from_front_and_back(sphere_scene, front_camera, back_camera):
    points = np.array([[0.0, 0.0, 0.5], [0.0, 0.0, -0.5], [0.3, 0.0, 0.4], [0.3, 0.0, -0.4]])
    np.testing.assert_array_equal(visible_from(sphere_scene, front_camera, points), [True, False, True, False])
    np.testing.assert_array_equal(visible_from(sphere_scene, back_camera, points), [False, True, False, True])


def test_gamma_visibility_means():
    gamma = np.array([[0.8, 0.1, 0.1], [0.2, 0.7, 0.1], [0.5, 0.4, 0.1]])
    means = gamma_visibility_means(gamma, [True, False, True], [False, True, True])
    assert means['gamma1_source'] == pytest.approx(0.65)
    assert means['gamma1_back_only'] == pytest.approx(0.2)
    assert means['gamma2_back'] == pytest.approx(0.55)
    assert means['gamma2_source_only'] == pytest.approx(0.1)
    assert np.isnan(gamma_visibility_means(gamma, [True] * 3, [True] * 3)['gamma1_back_only'])
    with pytest.raises(ValueError):
        gamma_visibility_means(gamma[:, :2], [True] * 3, [True] * 3)


@pytest.mark.parametrize('seed', range(5))
def test_hierarchical_render_matches_dense_render_on_seeded_scenes(seed):
    assert compositing_agreement(blob_scene(seed), Camera.orbit(0.0, image_size=(32, 32))) >= 0.95


def test_compositing_agreement_needs_foreground(front_camera):
    with pytest.raises(ValueError):
        compositing_agreement(AnalyticScene([]), front_camera)


def test_backside_stripes_cover_the_torso_back():
    scene = capsule_person(3)
    camera = Camera.orbit(180.0, image_size=(64, 64))
    frequency, axis, region = backside_stripes(scene, camera)
    assert frequency == pytest.approx(scene.primitives[0].texture.back.frequency)
    np.testing.assert_allclose(axis, [1.0, 0.0, 0.0])
    image, mask = render_gt(scene, camera)
    assert region.sum() > 20
    assert np.all(mask[region])
    assert stripe_energy(image, region, camera, frequency, axis) > 1e-3
    with pytest.raises(ValueError):
        backside_stripes(blob_scene(0), camera)


def test_experiment_command_writes_report(tmp_path):
    config = tiny_config(tmp_path)
    passed, results = cmd_experiment(config, ['compositing'])
    assert passed and [r.name for r in results] == ['compositing']
    assert len(results[0].frame) == 5
    assert os.path.isfile(os.path.join(config.run_dir, 'experiments', 'compositing.csv'))
    with pytest.raises(ValueError):
        cmd_experiment(config, ['bogus'])


def test_app_experiment_arguments(tmp_path):
    common = ['--run-dir', str(tmp_path / 'run'), '--set', f"data.root={tmp_path / 'data'}"]
    assert main(['experiment', 'bogus'] + common) == EXIT_USAGE
    assert main(['experiment', 'compositing'] + common) == EXIT_OK
    assert set(EXPERIMENTS) == {'compositing', 'initial', 'vol-ablation', 'refine', 'fusion', 'gamma',
                                'determinism'}


@pytest.mark.slow
def test_experiments_run_on_a_tiny_budget(tmp_path):
    config = tiny_config(tmp_path, 'data.n_scenes=3', 'data.held_out=1')
    cmd_synth_data(config)
    cmd_train_initial(config)
    cmd_train_refine(config)
    cmd_train_fusion(config)
    names = ['initial', 'refine', 'fusion', 'gamma']
    _, results = cmd_experiment(config, names)
    assert [r.name for r in results] == names
    for name in names:
        assert os.path.isfile(os.path.join(config.run_dir, 'experiments', f"{name}.csv"))
    assert list(results[1].frame['scene_id']) == ['0002']


# Desk-budget orderings: 10 training scenes, 5 held out, default desk preset

@pytest.fixture(scope='module')
def desk_run(tmp_path_factory):
    root = tmp_path_factory.mktemp('desk')
    config = RunConfig.load(overrides=[f"run.run_dir={root / 'run'}", f"data.root={root / 'data'}",
                                       'data.n_scenes=15', 'data.held_out=5'])
    cmd_synth_data(config)
    cmd_train_initial(config)
    cmd_train_refine(config)
    cmd_train_fusion(config)
    return config


@pytest.mark.slow
def test_initial_stage_reaches_desk_quality(desk_run):
    result = run_initial_reconstruction(desk_run)
    assert result.summary['chamfer'] < 0.05
    assert result.summary['p2s'] < 0.05
    assert result.summary['psnr_min'] > 22.0


@pytest.mark.slow
def test_volume_loss_lowers_shell_alpha_and_render_error(desk_run):
    summary = run_vol_ablation(desk_run).summary
    assert summary['shell_alpha_vol'] < summary['shell_alpha_no_vol']
    assert summary['render_l1_vol'] < summary['render_l1_no_vol']


@pytest.mark.slow
def test_refined_backsides_beat_coarse_renders(desk_run):
    frame = run_refine_comparison(desk_run).frame
    assert len(frame) == 5
    assert (frame['l1_refined'] < frame['l1_coarse']).all()
    assert (frame['stripe_energy_refined'] > frame['stripe_energy_coarse']).all()


@pytest.mark.slow
def test_fusion_improves_geometry_and_backside(desk_run):
    result = run_fusion_comparison(desk_run)
    assert len(result.frame) == 5
    assert result.frame['improved'].sum() >= 4


@pytest.mark.slow
def test_fusion_gamma_follows_visibility(desk_run):
    summary = run_gamma_sanity(desk_run).summary
    assert summary['gamma1_source'] > summary['gamma1_back_only']
    assert summary['gamma2_back'] > summary['gamma2_source_only']


@pytest.mark.slow
def test_repeated_runs_are_bit_identical(desk_run):
    result = run_determinism(desk_run)
    assert result.frame['identical'].all()
    assert result.passed
