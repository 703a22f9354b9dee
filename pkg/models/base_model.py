"""
Shared CRNN trunk and the abstract DcaseNet model.
"""
import logging
from abc import abstractmethod
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import expit, softmax

from config import RANDOM_SEED, TASKS
from errors import InvalidArgumentError, ShapeMismatchError, TooFewFramesError
from features.melspec import MelSpectrogram
from nn.base_layer import Layer, Sequential
from nn.blocks import ConvBlock

logger = logging.getLogger(__name__)


@dataclass
class ModelOutputs:
    """
    Outputs of one forward pass; heads of inactive tasks are None.

    Attributes:
        asc_logits (numpy.ndarray): batch x 10 pre-softmax scores
        tag_logits (numpy.ndarray): batch x 80 pre-sigmoid scores
        tag_probs (numpy.ndarray): batch x 80 probabilities
        sed_logits (numpy.ndarray): batch x T' x 14 pre-sigmoid scores
        sed_roll (numpy.ndarray): batch x T' x 14 probabilities
    """
    asc_logits: Optional[np.ndarray] = None
    tag_logits: Optional[np.ndarray] = None
    tag_probs: Optional[np.ndarray] = None
    sed_logits: Optional[np.ndarray] = None
    sed_roll: Optional[np.ndarray] = None

    @property
    def asc_probs(self):
        return None if self.asc_logits is None else softmax(self.asc_logits, axis=-1)

    def logits(self, task):
        return {'ASC': self.asc_logits, 'TAG': self.tag_logits, 'SED': self.sed_logits}[task]


def normalize_active(active):
    active = tuple(TASKS) if active is None else tuple(active)
    unknown = set(active) - set(TASKS)
    if unknown or not active:
        raise InvalidArgumentError(f"active tasks must be a nonempty subset of {TASKS}, got {active}")
    return tuple(task for task in TASKS if task in active)


def mean_over_freq(x):
    """(batch, channels, time, freq) -> (batch, time, channels)."""
    return x.mean(axis=3).transpose(0, 2, 1)


def mean_over_freq_backward(grad, shape):
    n_bands = shape[3]
    return np.broadcast_to((grad.transpose(0, 2, 1) / n_bands)[..., None], shape).copy()


def mean_over_time_backward(grad, n_frames):
    """Gradient of x.mean(axis=1) for x of shape (batch, time, features)."""
    return np.repeat((grad / n_frames)[:, None, :], n_frames, axis=1)


def global_average_backward(grad, shape):
    """Gradient of x.mean(axis=(2, 3)) for a 4-D x."""
    scale = shape[2] * shape[3]
    return np.broadcast_to((grad / scale)[:, :, None, None], shape).copy()


def accumulate(total, grad):
    return grad if total is None else total + grad


class BaseModel(Layer):
    """
    Abstract DcaseNet: four conv blocks shared by every variant, plus heads.

    Subclasses build their recurrent stage and task heads in build_heads and
    implement forward_heads / backward_heads on top of the conv feature map.

    Attributes:
        config (ArchitectureConfig): Structural hyperparameters
        dtype: Parameter and activation dtype
        conv (Sequential): block1..block4 ConvBlocks
    """

    # Task -> children that feed only that task's output
    TASK_HEADS = {}

    def __init__(self, config, seed=RANDOM_SEED, dtype=np.float32):
        super().__init__()
        self.config = config
        self.seed = seed
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(seed)

        blocks = []
        in_channels = 1
        for i, (out_channels, tp, fp) in enumerate(zip(config.channels, config.time_pool, config.freq_pool)):
            blocks.append((f'block{i + 1}', ConvBlock(in_channels, out_channels, (tp, fp), rng, config.kernel_size,
                                                      config.bn_momentum, config.bn_eps, dtype)))
            in_channels = out_channels
        self.conv = self.add_child('conv', Sequential(blocks))
        self.build_heads(rng)

        for name, param in self.named_parameters():
            param.name = name
        self.set_rng(np.random.default_rng([seed, 1]))
        self._active = None
        logger.debug("Built DcaseNet-%s with %d parameters", config.variant, self.parameter_count())

    @property
    def variant(self):
        return self.config.variant

    @property
    def final_conv_channels(self):
        return self.conv.children()[-1].out_channels

    @abstractmethod
    def build_heads(self, rng):
        """
        Register the recurrent stage and task heads.

        Args:
            rng (numpy.random.Generator): Generator for weight init
        """
        pass

    @abstractmethod
    def forward_heads(self, c, active):
        """
        Compute task outputs from the conv feature map.

        Args:
            c (numpy.ndarray): (batch, channels, T', F') conv features
            active (tuple): Active tasks

        Returns:
            ModelOutputs: Outputs of the active heads
        """
        pass

    @abstractmethod
    def backward_heads(self, grads):
        """
        Back-propagate task gradients to the conv feature map.

        Args:
            grads (dict): Task -> gradient w.r.t. that task's logits

        Returns:
            numpy.ndarray: Gradient w.r.t. the conv features
        """
        pass

    def forward(self, x, active=None, mode='eval', rng=None):
        """
        Run the model on a batch of log-mel spectrograms.

        Args:
            x (numpy.ndarray or MelSpectrogram): (batch, frames, n_mels) or a
                single (frames, n_mels) spectrogram
            active (iterable, optional): Tasks whose heads run (all when None)
            mode (str): 'train' or 'eval'
            rng (numpy.random.Generator, optional): Dropout generator

        Returns:
            ModelOutputs: Outputs of the active heads
        """
        if isinstance(x, MelSpectrogram):
            x = x.values
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim == 2:
            x = x[None]
        if x.ndim != 3 or x.shape[2] != self.config.n_mels:
            raise ShapeMismatchError(f"expected (batch, frames, {self.config.n_mels}) input, got {x.shape}")
        if x.shape[1] < self.config.min_frames:
            raise TooFewFramesError(f"input has {x.shape[1]} frames, need at least {self.config.min_frames}")
        active = normalize_active(active)

        self.set_mode(mode)
        if rng is not None:
            self.set_rng(rng)
        self._active = active
        c = self.conv.forward(x[:, None])
        return self.forward_heads(c, active)

    def backward(self, grads):
        """
        Accumulate parameter gradients for the given task logit gradients.

        Args:
            grads (dict): Task -> gradient w.r.t. asc_logits, tag_logits or sed_logits

        Returns:
            numpy.ndarray: Gradient w.r.t. the input spectrograms
        """
        if not grads:
            raise InvalidArgumentError("backward needs a gradient for at least one task")
        for task in grads:
            if self._active is None or task not in self._active:
                raise InvalidArgumentError(f"no forward output for inactive task {task}")
        dc = self.backward_heads(grads)
        return self.conv.backward(dc)[:, 0]

    def freeze_heads(self, keep):
        """
        Mark the parameters of every head not serving `keep` as not trainable.

        Only children listed in TASK_HEADS are touched; layers shared between
        tasks stay trainable.

        Args:
            keep (iterable): Tasks whose heads keep training

        Returns:
            list: Names of the frozen parameters
        """
        keep = set(normalize_active(keep))
        frozen = []
        for task, children in self.TASK_HEADS.items():
            if task in keep:
                continue
            for child in children:
                for name, param in self._children[child].named_parameters(f"{child}."):
                    param.trainable = False
                    frozen.append(name)
        logger.debug("Froze %d parameters outside the %s heads", len(frozen), sorted(keep))
        return frozen


def head_outputs(asc_logits=None, tag_logits=None, sed_logits=None):
    """Wrap head logits into ModelOutputs with sigmoid probabilities."""
    return ModelOutputs(
        asc_logits=asc_logits,
        tag_logits=tag_logits,
        tag_probs=None if tag_logits is None else expit(tag_logits),
        sed_logits=sed_logits,
        sed_roll=None if sed_logits is None else expit(sed_logits),
    )
