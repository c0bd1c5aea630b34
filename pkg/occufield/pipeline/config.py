"""
Run configuration

Layering, lowest precedence first:
    dataclass defaults -> preset from config.json -> [section] key=value file
    -> command-line `section.key=value` overrides
"""

from __future__ import annotations

import configparser
import logging
import os
from dataclasses import dataclass, field, fields, replace
from typing import Any, Dict, Iterable, Optional, Tuple

from ..utils.helpers import load_config_file
from ..utils.validators import validate_creatable_dir, validate_non_negative, validate_positive_int

logger = logging.getLogger(__name__)

CONFIG_PATH = os.path.join(os.path.dirname(os.path.dirname(__file__)), 'config.json')
DEFAULT_PRESET = 'desk'

_TRUE = {'1', 'true', 'yes', 'on'}
_FALSE = {'0', 'false', 'no', 'off'}


class ConfigError(ValueError):
    """Invalid configuration (unknown key, bad value, missing preset)"""


@dataclass
class DataConfig:
    root: str = 'runs/data'
    n_scenes: int = 10
    held_out: int = 0
    views: int = 4
    resolution: int = 128
    seed: int = 0
    n_occupancy: int = 5000
    n_color: int = 5000
    sigma: float = 0.05
    proxy_res: int = 32
    inflation: float = 0.05
    half_extent: float = 1.0


@dataclass
class NetworkConfig:
    widths: Tuple[int, ...] = (128, 128, 64, 64)
    frequencies: int = 6
    image_channels: Tuple[int, ...] = (16, 16, 16)
    image_strides: Tuple[int, ...] = (2, 2, 1)
    volume_channels: Tuple[int, ...] = (8, 8)


@dataclass
class FieldStageConfig:
    """Shared by the initial and fusion stages"""
    iterations: int = 5000
    batch_size: int = 2
    learning_rate: float = 2e-4
    n_points: int = 256
    n_color_points: int = 256
    n_rays: int = 64
    n_coarse: int = 24
    n_fine: int = 24
    use_vol: bool = True
    lambda_vol: float = 1.0
    checkpoint_every: int = 500
    log_every: int = 50
    seed: int = 0


@dataclass
class RefineConfig:
    steps: int = 2000
    channels: Tuple[int, ...] = (32, 32, 64, 64)
    learning_rate: float = 2e-3
    lambda_l1: float = 1.0
    lambda_vgg: float = 1.0
    gan: bool = False
    lambda_adv: float = 1.0
    checkpoint_every: int = 500
    log_every: int = 50
    seed: int = 0


@dataclass
class RenderConfig:
    n_coarse: int = 24
    n_fine: int = 24
    chunk: int = 1024
    mask_threshold: float = 0.5
    warp_epsilon: float = 0.1
    seed: int = 0


@dataclass
class MeshConfig:
    resolution: int = 128
    iso: float = 0.5
    format: str = 'ply'


@dataclass
class EvalConfig:
    n_samples: int = 10000
    n_surface: int = 10000
    seed: int = 0


SECTIONS = {
    'data': DataConfig,
    'network': NetworkConfig,
    'initial': FieldStageConfig,
    'fusion': FieldStageConfig,
    'refine': RefineConfig,
    'render': RenderConfig,
    'mesh': MeshConfig,
    'eval': EvalConfig,
}

# counts that must be strictly positive when present
_POSITIVE = {'n_scenes', 'views', 'resolution', 'n_occupancy', 'n_color', 'proxy_res', 'iterations',
             'batch_size', 'n_points', 'n_color_points', 'n_rays', 'n_coarse', 'steps', 'chunk',
             'n_samples', 'n_surface', 'frequencies'}


def _coerce(default: Any, raw: Any, name: str) -> Any:
    if not isinstance(raw, str):
        if isinstance(default, tuple):
            return tuple(int(v) for v in raw)
        if isinstance(default, bool):
            return bool(raw)
        return type(default)(raw)
    text = raw.strip()
    try:
        if isinstance(default, bool):
            lowered = text.lower()
            if lowered in _TRUE:
                return True
            if lowered in _FALSE:
                return False
            raise ValueError(text)
        if isinstance(default, tuple):
            return tuple(int(v) for v in text.split(',') if v.strip())
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError:
        raise ConfigError(f"Invalid value for {name}: {raw!r} (expected {type(default).__name__})")
    return text


@dataclass
class RunConfig:
    run_dir: str = 'runs/default'
    workers: int = 0
    preset: str = DEFAULT_PRESET
    data: DataConfig = field(default_factory=DataConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    initial: FieldStageConfig = field(default_factory=FieldStageConfig)
    fusion: FieldStageConfig = field(default_factory=FieldStageConfig)
    refine: RefineConfig = field(default_factory=RefineConfig)
    render: RenderConfig = field(default_factory=RenderConfig)
    mesh: MeshConfig = field(default_factory=MeshConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def set(self, section: str, key: str, value: Any) -> None:
        """Assign one value, converting it to the type of the default"""
        if section in ('run', ''):
            if key not in ('run_dir', 'workers'):
                raise ConfigError(f"Unknown key '{key}' in [run]")
            setattr(self, key, _coerce(getattr(self, key), value, f"run.{key}"))
            return
        if section not in SECTIONS:
            raise ConfigError(f"Unknown config section [{section}]; expected one of {sorted(SECTIONS)}")
        target = getattr(self, section)
        names = {f.name for f in fields(target)}
        if key not in names:
            raise ConfigError(f"Unknown key '{key}' in [{section}]; expected one of {sorted(names)}")
        setattr(target, key, _coerce(getattr(target, key), value, f"{section}.{key}"))

    def apply(self, values: Dict[str, Dict[str, Any]]) -> None:
        for section, entries in values.items():
            for key, value in entries.items():
                self.set(section, key, value)

    def apply_preset(self, name: str, config_path: str = CONFIG_PATH) -> None:
        presets = load_config_file(config_path).get('presets', {})
        if name not in presets:
            raise ConfigError(f"Unknown preset '{name}'; available: {sorted(presets)}")
        self.preset = name
        self.apply(presets[name])

    def apply_file(self, path: str) -> None:
        if not os.path.isfile(path):
            raise ConfigError(f"Config file not found: {path}")
        parser = configparser.ConfigParser()
        parser.optionxform = str
        try:
            parser.read(path)
        except configparser.Error as e:
            raise ConfigError(f"Cannot parse {path}: {e}")
        self.apply({section: dict(parser.items(section)) for section in parser.sections()})

    def apply_overrides(self, overrides: Iterable[str]) -> None:
        for item in overrides:
            if '=' not in item or '.' not in item.split('=', 1)[0]:
                raise ConfigError(f"Override must look like section.key=value, got {item!r}")
            path, value = item.split('=', 1)
            section, key = path.strip().split('.', 1)
            self.set(section, key, value)

    def validate(self) -> 'RunConfig':
        for section in SECTIONS:
            target = getattr(self, section)
            for f in fields(target):
                value = getattr(target, f.name)
                if f.name in _POSITIVE:
                    validate_positive_int(f"{section}.{f.name}", value)
                elif isinstance(value, float):
                    validate_non_negative(f"{section}.{f.name}", value)
                elif isinstance(value, tuple) and (not value or any(v < 1 for v in value)):
                    raise ConfigError(f"{section}.{f.name} must be a nonempty list of positive ints, got {value}")
        if self.data.views % 2:
            raise ConfigError(f"data.views must be even (front/back pair), got {self.data.views}")
        if self.data.held_out >= self.data.n_scenes:
            raise ConfigError(f"data.held_out ({self.data.held_out}) must leave training scenes "
                              f"out of {self.data.n_scenes}")
        if self.mesh.format not in ('obj', 'ply'):
            raise ConfigError(f"mesh.format must be obj or ply, got {self.mesh.format!r}")
        validate_creatable_dir(self.run_dir)
        validate_creatable_dir(self.data.root)
        return self

    @classmethod
    def load(cls, path: Optional[str] = None, preset: Optional[str] = DEFAULT_PRESET,
             overrides: Iterable[str] = (), config_path: str = CONFIG_PATH) -> 'RunConfig':
        config = cls()
        if preset:
            config.apply_preset(preset, config_path)
        if path:
            config.apply_file(path)
        config.apply_overrides(overrides)
        try:
            return config.validate()
        except ConfigError:
            raise
        except ValueError as e:
            raise ConfigError(str(e))

    def with_run_dir(self, run_dir: str) -> 'RunConfig':
        return replace(self, run_dir=run_dir)

    def to_dict(self) -> Dict[str, Dict[str, Any]]:
        out: Dict[str, Dict[str, Any]] = {'run': {'run_dir': self.run_dir, 'workers': self.workers,
                                                  'preset': self.preset}}
        for section in SECTIONS:
            target = getattr(self, section)
            out[section] = {f.name: getattr(target, f.name) for f in fields(target)}
        return out
