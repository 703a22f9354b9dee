"""
Multi-task loss with exact gradients w.r.t. the head logits.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, softmax

from config import LOSS_WEIGHTS, PROB_CLAMP
from errors import InvalidArgumentError, MissingLabelsError, ShapeMismatchError
from models.base_model import normalize_active


@dataclass
class LossResult:
    """
    Attributes:
        total (float): Weighted sum of the active task losses
        per_task (dict): Task -> unweighted loss
        grads (dict): Task -> gradient of total w.r.t. that task's logits
    """
    total: float
    per_task: dict = field(default_factory=dict)
    grads: dict = field(default_factory=dict)


def categorical_cross_entropy(logits, targets, clamp=PROB_CLAMP):
    """
    Mean cross-entropy of softmax(logits) against (soft) targets.

    Returns:
        tuple: (loss, gradient w.r.t. logits)
    """
    p = softmax(logits.astype(np.float64), axis=-1)
    clipped = np.clip(p, clamp, 1 - clamp)
    n = logits.shape[0]
    loss = -np.sum(targets * np.log(clipped)) / n
    # dL/dp is zero where the clamp is active
    dp = np.where(clipped == p, -targets / clipped, 0.0) / n
    dlogits = p * (dp - np.sum(dp * p, axis=-1, keepdims=True))
    return float(loss), dlogits.astype(logits.dtype)


def binary_cross_entropy(logits, targets, clamp=PROB_CLAMP):
    """
    Mean binary cross-entropy of sigmoid(logits) over every cell.

    Returns:
        tuple: (loss, gradient w.r.t. logits)
    """
    p = expit(logits.astype(np.float64))
    clipped = np.clip(p, clamp, 1 - clamp)
    loss = -np.mean(targets * np.log(clipped) + (1 - targets) * np.log(1 - clipped))
    dlogits = np.where(clipped == p, p - targets, 0.0) / p.size
    return float(loss), dlogits.astype(logits.dtype)


def multi_task_loss(out, y, active, weights=None):
    """
    Sum the losses of the active tasks.

    ASC uses categorical cross-entropy on the softmax, TAG and SED the mean
    binary cross-entropy over every output cell. Probabilities are clamped to
    [1e-7, 1 - 1e-7].

    Args:
        out (ModelOutputs): Model outputs
        y (TaskLabels): Targets
        active (iterable): Tasks contributing to the loss
        weights (dict, optional): Task -> loss weight (all 1 by default)

    Returns:
        LossResult: Total, per-task losses and logit gradients
    """
    active = normalize_active(active)
    weights = {**LOSS_WEIGHTS, **(weights or {})}
    result = LossResult(total=0.0)
    for task in active:
        logits = out.logits(task)
        targets = y.get(task)
        if targets is None:
            raise MissingLabelsError(f"no {task} labels for an active task")
        if logits is None:
            raise InvalidArgumentError(f"model produced no {task} output")
        if logits.shape != targets.shape:
            raise ShapeMismatchError(f"{task} output {logits.shape} does not match labels {targets.shape}")
        if task == 'ASC':
            loss, grad = categorical_cross_entropy(logits, targets)
        else:
            loss, grad = binary_cross_entropy(logits, targets)
        w = weights[task]
        result.per_task[task] = loss
        result.grads[task] = (w * grad).astype(logits.dtype)
        result.total += w * loss
    return result
