"""
Base layer and parameter classes for the numpy network kernels.
"""
from abc import ABC, abstractmethod
from collections import OrderedDict

import numpy as np

from errors import InvalidArgumentError

MODES = ('train', 'eval')


class Parameter:
    """
    Trainable tensor with its gradient buffer.

    Attributes:
        name (str): Dotted name, assigned by the owning model
        value (numpy.ndarray): Current parameter values
        grad (numpy.ndarray): Accumulated gradient, same shape as value
        trainable (bool): Whether the optimizer updates this parameter
    """

    def __init__(self, name, value, trainable=True):
        self.name = name
        self.value = np.ascontiguousarray(value)
        self.grad = np.zeros_like(self.value)
        self.trainable = trainable

    @property
    def shape(self):
        return self.value.shape

    @property
    def size(self):
        return self.value.size

    def zero_grad(self):
        self.grad.fill(0)

    def assign(self, value):
        """Replace the values in place, keeping dtype and shape."""
        value = np.asarray(value)
        if value.shape != self.value.shape:
            raise InvalidArgumentError(f"{self.name}: shape {value.shape} does not match {self.value.shape}")
        self.value[...] = value

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape}, dtype={self.value.dtype})"


class Layer(ABC):
    """
    Abstract base class for all layers and composite blocks.

    A layer caches what its backward pass needs during forward. backward
    accumulates parameter gradients and returns the gradient w.r.t. the input
    of the most recent forward call.

    Attributes:
        training (bool): True in train mode (batch statistics, dropout active)
        rng (numpy.random.Generator): Generator used by stochastic layers
    """

    def __init__(self):
        self._params = OrderedDict()
        self._children = OrderedDict()
        self._buffers = OrderedDict()
        self.training = False
        self.rng = None

    def add_parameter(self, name, value, trainable=True):
        param = Parameter(name, value, trainable)
        self._params[name] = param
        return param

    def add_child(self, name, layer):
        self._children[name] = layer
        return layer

    def add_buffer(self, name, value):
        self._buffers[name] = np.ascontiguousarray(value)

    def children(self):
        return list(self._children.values())

    def named_parameters(self, prefix=''):
        """
        Iterate over (dotted name, Parameter) pairs in registration order.
        """
        for name, param in self._params.items():
            yield prefix + name, param
        for child_name, child in self._children.items():
            yield from child.named_parameters(f"{prefix}{child_name}.")

    def parameters(self):
        return [param for _, param in self.named_parameters()]

    def named_buffers(self, prefix=''):
        for name, value in self._buffers.items():
            yield prefix + name, value
        for child_name, child in self._children.items():
            yield from child.named_buffers(f"{prefix}{child_name}.")

    def load_buffers(self, buffers, prefix=''):
        """Copy buffer values from a {dotted name: array} mapping."""
        for name in self._buffers:
            full = prefix + name
            if full in buffers:
                self._buffers[name] = np.array(buffers[full], dtype=self._buffers[name].dtype)
        for child_name, child in self._children.items():
            child.load_buffers(buffers, f"{prefix}{child_name}.")

    def parameter_count(self):
        return int(sum(param.size for param in self.parameters()))

    def set_mode(self, mode):
        """
        Switch this layer and its children to 'train' or 'eval' mode.
        """
        if mode not in MODES:
            raise InvalidArgumentError(f"mode must be one of {MODES}, got {mode!r}")
        self.training = mode == 'train'
        for child in self._children.values():
            child.set_mode(mode)

    def set_rng(self, rng):
        self.rng = rng
        for child in self._children.values():
            child.set_rng(rng)

    def zero_grad(self):
        for param in self.parameters():
            param.zero_grad()

    @abstractmethod
    def forward(self, x):
        """
        Compute the layer output and cache what backward needs.

        Args:
            x (numpy.ndarray): Layer input

        Returns:
            numpy.ndarray: Layer output
        """
        pass

    @abstractmethod
    def backward(self, grad):
        """
        Back-propagate a gradient through the most recent forward call.

        Args:
            grad (numpy.ndarray): Gradient w.r.t. the layer output

        Returns:
            numpy.ndarray: Gradient w.r.t. the layer input
        """
        pass

    def __call__(self, x):
        return self.forward(x)


class Sequential(Layer):
    """Chain of layers applied in registration order."""

    def __init__(self, layers=()):
        super().__init__()
        for name, layer in layers:
            self.add_child(name, layer)

    def forward(self, x):
        for layer in self._children.values():
            x = layer.forward(x)
        return x

    def backward(self, grad):
        for layer in reversed(self._children.values()):
            grad = layer.backward(grad)
        return grad
