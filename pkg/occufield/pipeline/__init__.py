from .config import RunConfig, ConfigError, DEFAULT_PRESET
from .field_trainer import FieldTrainer, bind_view, build_bundle, train_field
from .evaluation import EvaluationMetrics, SceneMetrics, psnr, read_report
from .gradcheck_suite import GRAD_PATHS, GradCheckResult, run_grad_checks
from .commands import (StageError, cmd_eval, cmd_grad_check, cmd_reconstruct, cmd_render_views,
                       cmd_synth_data, cmd_train_fusion, cmd_train_initial, cmd_train_refine)
from .experiments import EXPERIMENTS, ExperimentResult, cmd_experiment

__all__ = [
    'RunConfig', 'ConfigError', 'DEFAULT_PRESET', 'FieldTrainer', 'bind_view', 'build_bundle',
    'train_field', 'EvaluationMetrics', 'SceneMetrics', 'psnr', 'read_report', 'GRAD_PATHS',
    'GradCheckResult', 'run_grad_checks', 'StageError', 'cmd_eval', 'cmd_grad_check',
    'cmd_reconstruct', 'cmd_render_views', 'cmd_synth_data', 'cmd_train_fusion',
    'cmd_train_initial', 'cmd_train_refine', 'EXPERIMENTS', 'ExperimentResult', 'cmd_experiment',
]
