"""Joint and constrained training, Lagrange multiplier, logs and checkpoints."""

from .lagrange import LagrangeState, moving_average, update_beta, r0_from_gaussian_fit
from .log import TrainingLog
from .checkpoint import save_checkpoint, load_checkpoint
from .trainer import (
    TrainingResult, train, train_joint, train_constrained,
    joint_parameters, bind_joint, epoch_rng, draw_epoch_noise, evaluate_dataset_terms,
    MODEL_PREFIX, VS_PREFIX,
)

__all__ = [
    'LagrangeState', 'moving_average', 'update_beta', 'r0_from_gaussian_fit',
    'TrainingLog', 'save_checkpoint', 'load_checkpoint',
    'TrainingResult', 'train', 'train_joint', 'train_constrained',
    'joint_parameters', 'bind_joint', 'epoch_rng', 'draw_epoch_noise', 'evaluate_dataset_terms',
    'MODEL_PREFIX', 'VS_PREFIX',
]
