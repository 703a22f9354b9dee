"""
DcaseNet model variants, losses, Mix-up and checkpoints.
"""
import numpy as np

from config import RANDOM_SEED
from errors import InvalidArchitectureError
from models.architecture import ArchitectureConfig, tiny_config
from models.base_model import BaseModel, ModelOutputs
from models.dcasenet_v1 import DcaseNetV1
from models.dcasenet_v2 import DcaseNetV2
from models.dcasenet_v3 import DcaseNetV3
from models.labels import TaskLabels, events_to_roll, roll_to_events
from models.loss import LossResult, multi_task_loss
from models.mixup import mixup_batch

MODEL_CLASSES = {'v1': DcaseNetV1, 'v2': DcaseNetV2, 'v3': DcaseNetV3}


def build_model(cfg, seed=RANDOM_SEED, dtype=np.float32):
    """
    Instantiate the DcaseNet variant named by cfg.variant.

    Args:
        cfg (ArchitectureConfig): Architecture
        seed (int): Weight-initialization seed
        dtype: Parameter dtype (float64 for gradient checks)

    Returns:
        BaseModel: Freshly initialized model
    """
    if cfg.variant not in MODEL_CLASSES:
        raise InvalidArchitectureError(f"unknown variant {cfg.variant!r}")
    return MODEL_CLASSES[cfg.variant](cfg, seed=seed, dtype=dtype)


__all__ = ['ArchitectureConfig', 'tiny_config', 'BaseModel', 'ModelOutputs', 'DcaseNetV1', 'DcaseNetV2',
           'DcaseNetV3', 'TaskLabels', 'events_to_roll', 'roll_to_events', 'LossResult', 'multi_task_loss',
           'mixup_batch', 'build_model']
