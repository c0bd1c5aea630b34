import math
import os
from types import SimpleNamespace

import numpy as np
import pytest

from occufield.app import EXIT_CHECK, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main
from occufield.meshing import load_mesh
from occufield.pipeline import (GRAD_PATHS, ConfigError, EvaluationMetrics, RunConfig, SceneMetrics,
                                cmd_eval, cmd_grad_check, cmd_reconstruct, cmd_render_views, cmd_synth_data,
                                cmd_train_fusion, cmd_train_initial, cmd_train_refine, psnr, read_report,
                                run_grad_checks)
from occufield.pipeline import commands
from occufield.pipeline.commands import split_scenes
from occufield.pipeline.evaluation import AGGREGATE_ROW, REPORT_COLUMNS
from occufield.synth import DatasetManager

TINY_OVERRIDES = [
    'data.n_scenes=2', 'data.resolution=16', 'data.n_occupancy=64', 'data.n_color=32', 'data.proxy_res=8',
    'network.widths=8,8', 'network.frequencies=2', 'network.image_channels=4,4',
    'network.image_strides=2,1', 'network.volume_channels=3',
    'initial.iterations=2', 'initial.batch_size=1', 'initial.n_points=16', 'initial.n_color_points=8',
    'initial.n_rays=4', 'initial.n_coarse=4', 'initial.n_fine=2',
    'fusion.iterations=2', 'fusion.batch_size=1', 'fusion.n_points=16', 'fusion.n_color_points=8',
    'fusion.n_rays=4', 'fusion.n_coarse=4', 'fusion.n_fine=2',
    'refine.steps=2', 'refine.channels=4,4,4,4', 'refine.lambda_vgg=0',
    'render.n_coarse=4', 'render.n_fine=2', 'mesh.resolution=8', 'eval.n_samples=200', 'eval.n_surface=200',
]


def tiny_config(tmp_path, *extra):
    overrides = [f"run.run_dir={tmp_path / 'run'}", f"data.root={tmp_path / 'data'}"]
    return RunConfig.load(overrides=overrides + TINY_OVERRIDES + list(extra))


def test_default_preset_values():
    config = RunConfig.load()
    assert config.preset == 'desk'
    assert config.network.widths == (128, 128, 64, 64)
    assert config.refine.channels == (32, 32, 64, 64)
    assert config.initial.learning_rate == pytest.approx(2e-4)


def test_full_preset_scales_up():
    config = RunConfig.load(preset='full')
    assert config.network.widths == (1024, 512, 256, 128)
    assert config.data.resolution == 512


def test_config_layering(tmp_path):
    path = tmp_path / 'run.ini'
    path.write_text("[initial]\niterations = 7\nuse_vol = no\n\n[mesh]\nformat = obj\n")
    config = RunConfig.load(str(path), overrides=['initial.iterations=9', 'network.widths=16, 8'])
    assert config.initial.iterations == 9
    assert config.initial.use_vol is False
    assert config.mesh.format == 'obj'
    assert config.network.widths == (16, 8)
    assert config.fusion.iterations == 5000


@pytest.mark.parametrize('override', [
    'initial.bogus=1', 'nowhere.iterations=1', 'initial.iterations=many', 'initial.use_vol=maybe',
    'initial.iterations=0', 'data.views=3', 'mesh.format=stl', 'data.held_out=10', 'iterations=5',
])
def test_invalid_config_values(override):
    with pytest.raises(ConfigError):
        RunConfig.load(overrides=[override])


def test_missing_config_file_and_preset(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.load(str(tmp_path / 'missing.ini'))
    with pytest.raises(ConfigError):
        RunConfig.load(preset='huge')


def test_config_to_dict():
    values = RunConfig.load(overrides=['run.workers=3']).to_dict()
    assert values['run']['workers'] == 3
    assert values['refine']['gan'] is False


def test_psnr_values():
    image = np.full((4, 4, 3), 0.5)
    assert psnr(image, image) == math.inf
    assert psnr(image + 0.1, image) == pytest.approx(20.0)
    mask = np.zeros((4, 4), dtype=bool)
    mask[0, 0] = True
    noisy = image.copy()
    noisy[1:] = 0.0
    assert psnr(noisy, image, mask) == math.inf
    with pytest.raises(ValueError):
        psnr(image, image[:2])
    with pytest.raises(ValueError):
        psnr(image, image, np.zeros((4, 4), dtype=bool))


def test_report_columns_and_mean_row(tmp_path):
    evaluation = EvaluationMetrics([SceneMetrics('0000', {'p2s': 0.1, 'chamfer': 0.2, 'psnr_back': 20.0}),
                                    SceneMetrics('0001', {'p2s': 0.3, 'chamfer': 0.4})])
    aggregate = evaluation.aggregate()
    assert aggregate['p2s'] == pytest.approx(0.2)
    assert aggregate['psnr_back'] == pytest.approx(20.0)
    assert np.isnan(aggregate['psnr_view_90'])

    frame = read_report(evaluation.write_report(str(tmp_path / 'reports' / 'eval.csv')))
    assert list(frame.columns) == REPORT_COLUMNS
    assert list(frame['scene_id']) == ['0000', '0001', AGGREGATE_ROW]
    assert frame['chamfer'].iloc[-1] == pytest.approx(0.3)
    assert np.isnan(frame['psnr_back'].iloc[1])


def test_split_scenes(tmp_path):
    config = tiny_config(tmp_path, 'data.held_out=1')
    assert split_scenes(config, ['0001', '0000']) == (['0000'], ['0001'])
    with pytest.raises(ValueError):
        split_scenes(config, ['0000'])


def test_every_gradient_path_passes():
    results = run_grad_checks(seeds=(0,))
    assert [r.path for r in results] == list(GRAD_PATHS)
    failed = {r.path: r.max_rel_error for r in results if not r.passed}
    assert not failed


def test_sign_error_is_caught():
    results = run_grad_checks(['loss_vol', 'compositing'], seeds=(0,), sign_error='loss_vol')
    verdicts = {r.path: r.passed for r in results}
    assert verdicts == {'loss_vol': False, 'compositing': True}
    with pytest.raises(ValueError):
        run_grad_checks(['no_such_path'])
    with pytest.raises(ValueError):
        run_grad_checks(['loss_vol'], sign_error='compositing')


def test_grad_check_command_writes_report(tmp_path):
    config = tiny_config(tmp_path)
    passed, results = cmd_grad_check(config, paths=['conv3d'])
    assert passed and len(results) == 1
    assert os.path.isfile(os.path.join(config.run_dir, 'gradcheck.csv'))
    passed, _ = cmd_grad_check(config, paths=['conv3d'], sign_error='conv3d',
                               report=str(tmp_path / 'negative.csv'))
    assert not passed


def test_synth_data_refuses_to_overwrite(tmp_path):
    config = tiny_config(tmp_path, 'data.n_scenes=1')
    dataset = cmd_synth_data(config)
    assert dataset.scene_ids == ['0000']
    with pytest.raises(ValueError):
        cmd_synth_data(config)
    assert cmd_synth_data(config, force=True).scene_ids == ['0000']


def test_training_without_dataset_fails(tmp_path):
    with pytest.raises(ValueError):
        cmd_train_initial(tiny_config(tmp_path))


def test_refine_learning_rate_reaches_the_trainer(tmp_path, monkeypatch):
    config = tiny_config(tmp_path, 'refine.learning_rate=0.005')
    captured = {}

    def fake_train_refiner(pairs, run_dir, **kwargs):
        captured.update(kwargs)
        return SimpleNamespace(last_checkpoint=os.path.join(run_dir, 'refine.occf'))

    monkeypatch.setattr(commands, 'load_field', lambda config, fusion: None)
    monkeypatch.setattr(commands, 'training_records', lambda config: [])
    monkeypatch.setattr(commands, 'train_refiner', fake_train_refiner)
    cmd_train_refine(config)
    assert captured['learning_rate'] == pytest.approx(0.005)


def test_app_usage_errors(tmp_path):
    assert main(['no-such-command']) == EXIT_USAGE
    assert main(['grad-check', '--run-dir', str(tmp_path), '--set', 'mesh.bogus=1']) == EXIT_USAGE
    assert main(['grad-check', '--run-dir', str(tmp_path), '--set', 'broken']) == EXIT_USAGE


def test_app_grad_check_exit_code(tmp_path):
    assert main(['grad-check', '--run-dir', str(tmp_path), '--paths', 'loss_vol,conv3d']) == EXIT_OK
    assert os.path.isfile(tmp_path / 'gradcheck.csv')
    assert os.path.isfile(tmp_path / 'run.log')


def test_app_runtime_error_exit_code(tmp_path):
    argv = ['eval', '--run-dir', str(tmp_path / 'run'), '--set', f"data.root={tmp_path / 'data'}"]
    assert main(argv) == EXIT_RUNTIME


def test_exit_code_constants():
    assert (EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_CHECK) == (0, 1, 2, 3)


@pytest.mark.slow
def test_end_to_end_pipeline(tmp_path):
    config = tiny_config(tmp_path)
    cmd_synth_data(config)
    assert os.path.isfile(cmd_train_initial(config))
    assert os.path.isfile(cmd_train_refine(config))
    assert os.path.isfile(cmd_train_fusion(config))
    assert os.path.isfile(os.path.join(config.run_dir, 'loss_initial.csv'))

    rendered = cmd_render_views(config, '0000', 'front')
    assert {'final', 'gamma', 'mask', 'warp'} <= set(rendered)

    written = cmd_reconstruct(config, '0000')
    assert {'refined', 'mesh', 'view_0', 'view_270'} <= set(written)
    load_mesh(written['mesh'])

    gt_dir = str(tmp_path / 'gt_back')
    assert 'refined' not in cmd_reconstruct(config, '0000', use_gt_back=True, render_ring=False, out_dir=gt_dir)
    with pytest.raises(ValueError):
        cmd_reconstruct(config, '0000', out_dir=DatasetManager(config.data.root).scene_dir('0000'))

    evaluation = cmd_eval(config, scene_ids=['0000', '0001'])
    assert [s.scene_id for s in evaluation.scenes] == ['0000']
    frame = read_report(os.path.join(config.run_dir, 'eval.csv'))
    assert list(frame['scene_id']) == ['0000', AGGREGATE_ROW]


@pytest.mark.slow
def test_end_to_end_through_the_app(tmp_path):
    common = ['--run-dir', str(tmp_path / 'run'), '--set', f"data.root={tmp_path / 'data'}"]
    for item in TINY_OVERRIDES:
        common += ['--set', item]
    assert main(['synth-data'] + common) == EXIT_OK
    assert main(['synth-data'] + common) == EXIT_RUNTIME
    assert main(['train-initial', '--no-vol'] + common) == EXIT_OK
    assert main(['render-views', '0001', '--view', 'back'] + common) == EXIT_OK
