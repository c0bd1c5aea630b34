# Tensor arithmetic with reverse-mode differentiation and Adam
from . import ops
from .tensor import ShapeError, Tensor, as_tensor, backward, no_grad
from .optim import Adam, OptimState, adam_step
from .gradcheck import grad_check
from .checkpoint import load_checkpoint, save_checkpoint
from .rng import make_stream
from .training import TrainerBase, TrainingAborted

__all__ = [
    'ops', 'ShapeError', 'Tensor', 'as_tensor', 'backward', 'no_grad',
    'Adam', 'OptimState', 'adam_step', 'grad_check',
    'load_checkpoint', 'save_checkpoint', 'make_stream', 'TrainerBase', 'TrainingAborted',
]
