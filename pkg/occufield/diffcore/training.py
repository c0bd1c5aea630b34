"""
Step loop shared by the field and refiner trainers

Handles per-step random streams, periodic checkpoints holding every
registered module and optimizer, resume, and aborting on a non-finite loss.
"""

from __future__ import annotations

import logging
import os
from typing import Callable, Dict, Mapping, Optional

import numpy as np
from tqdm import tqdm

from ..utils.logger import log_step
from .checkpoint import load_checkpoint, save_checkpoint
from .nn import Layer
from .optim import Adam
from .rng import make_stream

logger = logging.getLogger(__name__)

STEP_KEY = 'train/step'


class TrainingAborted(RuntimeError):
    """Raised on a non-finite loss; `checkpoint_path` is the last good checkpoint (or None)"""

    def __init__(self, message: str, checkpoint_path: Optional[str] = None):
        super().__init__(message)
        self.checkpoint_path = checkpoint_path


class TrainerBase:
    """
    Subclasses register their modules/optimizers and implement `train_step`,
    which returns a dict of float losses after applying its updates.
    """

    stage = 'train'

    def __init__(self, run_dir: str, seed: int = 0, checkpoint_every: int = 500,
                 log_every: int = 50, progress: bool = False):
        self.run_dir = run_dir
        self.seed = int(seed)
        self.checkpoint_every = int(checkpoint_every)
        self.log_every = max(int(log_every), 1)
        self.progress = progress
        self.modules: Dict[str, Layer] = {}
        self.optimizers: Dict[str, Adam] = {}
        self.step = 0
        self.last_checkpoint: Optional[str] = None
        self.history: Dict[str, list] = {}

    @property
    def checkpoint_path(self) -> str:
        return os.path.join(self.run_dir, 'checkpoints', f"{self.stage}.occf")

    def register(self, prefix: str, module: Layer) -> Layer:
        self.modules[prefix] = module
        return module

    def register_optimizer(self, name: str, optimizer: Adam) -> Adam:
        self.optimizers[name] = optimizer
        return optimizer

    def state_dict(self) -> Dict[str, np.ndarray]:
        tensors: Dict[str, np.ndarray] = {}
        for prefix, module in self.modules.items():
            tensors.update(module.state_dict(prefix))
        for name, optimizer in self.optimizers.items():
            tensors.update(optimizer.state_dict(f"adam/{name}/"))
        tensors[STEP_KEY] = np.array([float(self.step)])
        return tensors

    def load_state(self, tensors: Mapping[str, np.ndarray], with_optimizers: bool = True) -> None:
        for prefix, module in self.modules.items():
            module.load_state_dict(tensors, prefix=prefix)
        if with_optimizers:
            for name, optimizer in self.optimizers.items():
                optimizer.load_state_dict(tensors, prefix=f"adam/{name}/")
        if STEP_KEY in tensors:
            self.step = int(np.asarray(tensors[STEP_KEY]).reshape(-1)[0])

    def save(self) -> str:
        self.last_checkpoint = save_checkpoint(self.checkpoint_path, self.state_dict())
        return self.last_checkpoint

    def resume(self, path: Optional[str] = None) -> bool:
        """Restore from `path` (default: this stage's checkpoint) if it exists"""
        path = path or self.checkpoint_path
        if not os.path.exists(path):
            return False
        self.load_state(load_checkpoint(path))
        self.last_checkpoint = path
        logger.info(f"Resumed {self.stage} from {path} at step {self.step}")
        return True

    def guard(self, losses: Mapping[str, float]) -> None:
        """Abort before any update is applied when a loss is not finite"""
        bad = {k: v for k, v in losses.items() if not np.isfinite(v)}
        if bad:
            raise TrainingAborted(f"{self.stage}: non-finite loss at step {self.step}: {bad}",
                                  self.last_checkpoint)

    def train_step(self, step: int, rng: np.random.Generator) -> Dict[str, float]:
        raise NotImplementedError

    def fit(self, steps: int, on_step: Optional[Callable[[int, Dict[str, float]], None]] = None) -> Dict[str, list]:
        """Run until `steps` total steps; returns the per-loss history of this call"""
        logger.info(f"{self.stage}: training steps {self.step}..{steps}")
        bar = tqdm(total=steps, initial=self.step, desc=self.stage, disable=not self.progress)
        try:
            while self.step < steps:
                rng = make_stream(self.seed, self.stage, self.step)
                losses = self.train_step(self.step, rng)
                for name, value in losses.items():
                    self.history.setdefault(name, []).append(float(value))
                if on_step is not None:
                    on_step(self.step, losses)
                if self.step % self.log_every == 0:
                    log_step(logger, self.stage, self.step, losses)
                self.step += 1
                bar.update(1)
                if self.checkpoint_every > 0 and self.step % self.checkpoint_every == 0:
                    self.save()
        finally:
            bar.close()
        self.save()
        return self.history
