"""
Adam optimizer.
"""
import logging
from dataclasses import dataclass

import numpy as np

from config import ADAM_BETA1, ADAM_BETA2, ADAM_EPS, LEARNING_RATE
from errors import NonFiniteGradientError

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    """
    Per-parameter Adam moments.

    Attributes:
        m (numpy.ndarray): First-moment estimate
        v (numpy.ndarray): Second-moment estimate
        t (int): Number of steps taken
        lr (float): Learning rate
        beta1 (float): First-moment decay
        beta2 (float): Second-moment decay
        eps (float): Denominator offset
    """
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = LEARNING_RATE
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS

    @classmethod
    def for_parameter(cls, param, lr=LEARNING_RATE, beta1=ADAM_BETA1, beta2=ADAM_BETA2, eps=ADAM_EPS):
        return cls(np.zeros_like(param.value), np.zeros_like(param.value), 0, lr, beta1, beta2, eps)


def check_finite_gradient(param):
    if not np.all(np.isfinite(param.grad)):
        raise NonFiniteGradientError(param.name)


def adam_step(param, state):
    """
    Apply one bias-corrected Adam update and zero the gradient.

        m <- b1 m + (1 - b1) g
        v <- b2 v + (1 - b2) g^2
        p <- p - lr * m_hat / (sqrt(v_hat) + eps)

    Args:
        param (Parameter): Parameter with an accumulated gradient
        state (AdamState): Its optimizer state, updated in place

    Returns:
        tuple: (param, state)
    """
    check_finite_gradient(param)
    g = param.grad
    state.t += 1
    state.m = state.beta1 * state.m + (1 - state.beta1) * g
    state.v = state.beta2 * state.v + (1 - state.beta2) * (g * g)
    m_hat = state.m / (1.0 - state.beta1 ** state.t)
    v_hat = state.v / (1.0 - state.beta2 ** state.t)
    param.value -= (state.lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(param.value.dtype, copy=False)
    param.zero_grad()
    return param, state


class Adam:
    """
    Adam over a list of named parameters.

    A step first verifies every gradient is finite, so a failing step leaves
    all parameters and moments untouched.

    Args:
        params (list): Parameters to optimize (frozen ones are skipped)
        lr (float): Learning rate
    """

    def __init__(self, params, lr=LEARNING_RATE, beta1=ADAM_BETA1, beta2=ADAM_BETA2, eps=ADAM_EPS):
        self.params = [p for p in params if p.trainable]
        self.lr = lr
        self.states = {p.name: AdamState.for_parameter(p, lr, beta1, beta2, eps) for p in self.params}

    def step(self):
        for param in self.params:
            check_finite_gradient(param)
        for param in self.params:
            adam_step(param, self.states[param.name])

    def zero_grad(self):
        for param in self.params:
            param.zero_grad()

    def state_dict(self):
        """{name: AdamState} for checkpointing."""
        return dict(self.states)

    def load_state_dict(self, states):
        for name, state in states.items():
            if name not in self.states:
                continue
            current = self.states[name]
            current.m = np.array(state.m, dtype=current.m.dtype).reshape(current.m.shape)
            current.v = np.array(state.v, dtype=current.v.dtype).reshape(current.v.shape)
            current.t = int(state.t)
        logger.debug("Restored Adam state for %d parameters", len(states))
