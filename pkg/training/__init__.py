"""
Task specs, batch sampling, the training engine and evaluation.
"""

from training.specs import Schedule, TaskSpec
from training.engine import TrainingEngine, fine_tune, fine_tune_engine, joint_train
from training.evaluation import evaluate_task

__all__ = ['Schedule', 'TaskSpec', 'TrainingEngine', 'joint_train', 'fine_tune', 'fine_tune_engine',
           'evaluate_task']
