"""
Whole-model gradient verification on random inputs.
"""
import logging
from dataclasses import replace

import numpy as np

from config import GRADCHECK_STEP, TASKS
from models.labels import TaskLabels, scene_one_hot
from models.loss import multi_task_loss
from nn.gradcheck import activation_pattern, finite_difference_check

logger = logging.getLogger(__name__)


def random_batch(cfg, rng, batch_size=2, n_frames=16, dtype=np.float64):
    """Random spectrograms and labels shaped for cfg."""
    x = rng.standard_normal((batch_size, n_frames, cfg.n_mels)).astype(dtype)
    pooled = cfg.pooled_frames(n_frames)
    labels = TaskLabels(
        scene=scene_one_hot(rng.integers(0, cfg.num_scenes, batch_size), cfg.num_scenes, dtype),
        tags=(rng.random((batch_size, cfg.num_tags)) < 0.3).astype(dtype),
        events=(rng.random((batch_size, pooled, cfg.num_events)) < 0.3).astype(dtype),
    )
    return x, labels


def model_loss_fn(model, x, labels, active, weights=None):
    """loss_fn(backward) closure over an eval-mode forward pass."""
    def loss_fn(backward):
        out = model.forward(x, active=active, mode='eval')
        result = multi_task_loss(out, labels, active, weights)
        if backward:
            model.backward(result.grads)
        return result.total
    return loss_fn


def check_model_gradients(cfg, tolerance, active=TASKS, seed=0, batch_size=2, n_frames=16, max_entries=8,
                          h=GRADCHECK_STEP):
    """
    Finite-difference check of the full multi-task loss in float64.

    Dropout is disabled. One train-mode pass sets the batch-norm running
    statistics, after which every evaluation runs in eval mode.

    Args:
        cfg (ArchitectureConfig): Architecture to check (a tiny one in practice)
        tolerance (float): Maximum accepted relative error
        active (iterable): Tasks in the loss
        seed (int): Seed for weights, inputs and entry sampling
        max_entries (int): Sampled entries per parameter tensor

    Returns:
        GradCheckReport: Check result
    """
    from models import build_model

    cfg = replace(cfg, dropout=0.0)
    rng = np.random.default_rng(seed)
    model = build_model(cfg, seed=seed, dtype=np.float64)
    x, labels = random_batch(cfg, rng, batch_size, n_frames)
    model.forward(x, active=active, mode='train')
    logger.info("Checking DcaseNet-%s gradients (%d parameters)", cfg.variant, model.parameter_count())
    return finite_difference_check(model_loss_fn(model, x, labels, active), model.parameters(), tolerance,
                                   h=h, max_entries=max_entries, rng=rng,
                                   pattern_fn=lambda: activation_pattern(model))
