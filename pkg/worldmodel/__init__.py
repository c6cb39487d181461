"""
Recurrent latent world model: network, loss, training, rollouts and model files
"""

from .config import ModelConfig
from .network import WorldModel, cast_params
from .loss import SequenceBatch, loss_sequence, loss_terms, jep_terms, total_loss
from .trainer import train, training_windows, TrainingResult, check_dataset
from .rollout import filter_step, filter_sequence, open_loop_rollout, RolloutResult
from .storage import ModelSnapshot, save_model, load_model

__all__ = [
    'ModelConfig', 'WorldModel', 'cast_params',
    'SequenceBatch', 'loss_sequence', 'loss_terms', 'jep_terms', 'total_loss',
    'train', 'training_windows', 'TrainingResult', 'check_dataset',
    'filter_step', 'filter_sequence', 'open_loop_rollout', 'RolloutResult',
    'ModelSnapshot', 'save_model', 'load_model',
]
