"""
Command-line entry point

    occufield <subcommand> [--config FILE] [--preset NAME] [--set section.key=value ...]

Exit codes: 0 ok, 1 usage or configuration error, 2 runtime failure,
3 gradient check or experiment failure.
"""

import argparse
import logging
import os
import sys
from typing import List, Optional

from dotenv import load_dotenv

from .diffcore.training import TrainingAborted
from .pipeline.commands import (StageError, cmd_eval, cmd_grad_check, cmd_reconstruct, cmd_render_views,
                                cmd_synth_data, cmd_train_fusion, cmd_train_initial, cmd_train_refine)
from .pipeline.config import DEFAULT_PRESET, ConfigError, RunConfig
from .pipeline.experiments import EXPERIMENTS, cmd_experiment
from .utils.logger import add_file_handler, log_error, setup_logger

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_CHECK = 3

logger = logging.getLogger(__name__)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _experiment_name(value: str) -> str:
    if value not in EXPERIMENTS:
        raise argparse.ArgumentTypeError(f"unknown experiment '{value}' (choose from {', '.join(EXPERIMENTS)})")
    return value


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--config', help="key=value config file with [section] headers")
    parser.add_argument('--preset', default=DEFAULT_PRESET, help="preset from config.json (default: %(default)s)")
    parser.add_argument('--set', dest='overrides', action='append', default=[], metavar='SECTION.KEY=VALUE',
                        help="override one config value (repeatable)")
    parser.add_argument('--run-dir', help="shortcut for --set run.run_dir=...")
    parser.add_argument('--progress', action='store_true', help="show progress bars")


def create_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog='occufield', description="Single-image textured mesh reconstruction pipeline")
    sub = parser.add_subparsers(dest='command', parser_class=_Parser)
    sub.required = True

    p = sub.add_parser('synth-data', help="generate the synthetic capsule-person dataset")
    _common(p)
    p.add_argument('--force', action='store_true', help="regenerate an existing dataset")

    p = sub.add_parser('train-initial', help="train the initial-stage field")
    _common(p)
    p.add_argument('--no-vol', action='store_true', help="drop the volume-rendering loss")
    p.add_argument('--no-resume', action='store_true')

    p = sub.add_parser('render-views', help="render the backside of one scene")
    _common(p)
    p.add_argument('scene')
    p.add_argument('--view', default='front', help="front, back or an azimuth in degrees")
    p.add_argument('--payloads', default='final,gamma')
    p.add_argument('--fusion', action='store_true', help="render with the fusion field")
    p.add_argument('--checkpoint')
    p.add_argument('--out')

    p = sub.add_parser('train-refine', help="pre-render coarse backsides and train the refiner")
    _common(p)
    p.add_argument('--no-resume', action='store_true')

    p = sub.add_parser('train-fusion', help="train the fusion-stage field")
    _common(p)
    p.add_argument('--no-resume', action='store_true')

    p = sub.add_parser('reconstruct', help="three-stage inference to a textured mesh")
    _common(p)
    p.add_argument('scene')
    p.add_argument('--view', default='front')
    p.add_argument('--use-gt-back', action='store_true', help="bypass the refiner with the true backside")
    p.add_argument('--initial-checkpoint')
    p.add_argument('--refine-checkpoint')
    p.add_argument('--fusion-checkpoint')
    p.add_argument('--no-ring', action='store_true', help="skip the four-view ring renders")
    p.add_argument('--out')

    p = sub.add_parser('eval', help="metrics of reconstructions against ground truth")
    _common(p)
    p.add_argument('--scenes', help="comma separated scene ids (default: held-out scenes)")
    p.add_argument('--report')

    p = sub.add_parser('grad-check', help="check every differentiable path against finite differences")
    _common(p)
    p.add_argument('--paths', help="comma separated subset of paths")
    p.add_argument('--report')

    p = sub.add_parser('experiment', help="run quality experiments (all when none are named)")
    _common(p)
    p.add_argument('names', nargs='*', type=_experiment_name, metavar='NAME',
                   help=f"one of {', '.join(EXPERIMENTS)}")
    return parser


def _split(value: Optional[str]) -> Optional[List[str]]:
    if value is None:
        return None
    return [v.strip() for v in value.split(',') if v.strip()]


def load_run_config(args: argparse.Namespace) -> RunConfig:
    overrides = list(args.overrides)
    if args.run_dir:
        overrides.append(f"run.run_dir={args.run_dir}")
    return RunConfig.load(args.config, preset=args.preset, overrides=overrides)


def dispatch(args: argparse.Namespace, config: RunConfig) -> int:
    command = args.command
    if command == 'synth-data':
        dataset = cmd_synth_data(config, force=args.force, progress=args.progress)
        logger.info(f"Dataset ready: {len(dataset)} scenes under {dataset.root}")
    elif command == 'train-initial':
        cmd_train_initial(config, no_vol=args.no_vol, resume=not args.no_resume, progress=args.progress)
    elif command == 'render-views':
        cmd_render_views(config, args.scene, args.view, payloads=_split(args.payloads), fusion=args.fusion,
                         checkpoint=args.checkpoint, out_dir=args.out)
    elif command == 'train-refine':
        cmd_train_refine(config, resume=not args.no_resume, progress=args.progress)
    elif command == 'train-fusion':
        cmd_train_fusion(config, resume=not args.no_resume, progress=args.progress)
    elif command == 'reconstruct':
        cmd_reconstruct(config, args.scene, args.view, use_gt_back=args.use_gt_back,
                        initial_checkpoint=args.initial_checkpoint, refine_checkpoint=args.refine_checkpoint,
                        fusion_checkpoint=args.fusion_checkpoint, out_dir=args.out,
                        render_ring=not args.no_ring, progress=args.progress)
    elif command == 'eval':
        cmd_eval(config, scene_ids=_split(args.scenes), report=args.report)
    elif command == 'grad-check':
        passed, _ = cmd_grad_check(config, paths=_split(args.paths), report=args.report)
        if not passed:
            return EXIT_CHECK
    elif command == 'experiment':
        passed, _ = cmd_experiment(config, names=args.names, progress=args.progress)
        if not passed:
            return EXIT_CHECK
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    level = getattr(logging, os.environ.get('OCCUFIELD_LOG_LEVEL', 'INFO').upper(), logging.INFO)
    root = setup_logger('occufield', level)

    try:
        args = create_parser().parse_args(argv)
        config = load_run_config(args)
    except UsageError as e:
        sys.stderr.write(f"occufield: {e}\n")
        return EXIT_USAGE
    except ConfigError as e:
        log_error(root, e, "configuration")
        return EXIT_USAGE

    add_file_handler(root, os.path.join(config.run_dir, 'run.log'))
    logger.info(f"occufield {args.command} (preset {config.preset}, run dir {config.run_dir})")
    try:
        return dispatch(args, config)
    except TrainingAborted as e:
        log_error(root, e, f"last checkpoint: {e.checkpoint_path}")
        return EXIT_RUNTIME
    except StageError as e:
        log_error(root, e.error, f"stage {e.stage}")
        return EXIT_RUNTIME
    except (ValueError, RuntimeError, OSError) as e:
        log_error(root, e, args.command)
        return EXIT_RUNTIME


if __name__ == '__main__':
    sys.exit(main())
