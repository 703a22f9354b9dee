"""
Composite blocks built from the primitive layers.
"""
import numpy as np

from config import BN_EPS, BN_MOMENTUM, DENSE_LAYERS, DROPOUT, KERNEL_SIZE
from nn.base_layer import Layer, Sequential
from nn.layers import BatchNorm2d, Conv2d, Dropout, Linear, MaxPool2d, ReLU


class ConvBlock(Sequential):
    """
    Two [conv, batch norm, ReLU] stages followed by max pooling.

    Args:
        in_channels (int): Input channel count
        out_channels (int): Output channel count of both convolutions
        pool (tuple): (time_pool, freq_pool); (1, 1) disables pooling
        rng (numpy.random.Generator): Generator for weight init
        kernel_size (int): Convolution kernel size
        dtype: Parameter dtype
    """

    def __init__(self, in_channels, out_channels, pool, rng, kernel_size=KERNEL_SIZE,
                 momentum=BN_MOMENTUM, eps=BN_EPS, dtype=np.float32):
        super().__init__([
            ('conv1', Conv2d(in_channels, out_channels, kernel_size, rng, dtype)),
            ('bn1', BatchNorm2d(out_channels, momentum, eps, dtype)),
            ('relu1', ReLU()),
            ('conv2', Conv2d(out_channels, out_channels, kernel_size, rng, dtype)),
            ('bn2', BatchNorm2d(out_channels, momentum, eps, dtype)),
            ('relu2', ReLU()),
            ('pool', MaxPool2d(pool)),
        ])
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.pool = tuple(pool)


class ResidualBlock(Layer):
    """
    conv-bn-relu-conv-bn plus a shortcut, then ReLU.

    The shortcut is a 1x1 convolution when the channel count changes and the
    identity otherwise.
    """

    def __init__(self, in_channels, out_channels, rng, kernel_size=KERNEL_SIZE,
                 momentum=BN_MOMENTUM, eps=BN_EPS, dtype=np.float32):
        super().__init__()
        self.main = self.add_child('main', Sequential([
            ('conv1', Conv2d(in_channels, out_channels, kernel_size, rng, dtype)),
            ('bn1', BatchNorm2d(out_channels, momentum, eps, dtype)),
            ('relu', ReLU()),
            ('conv2', Conv2d(out_channels, out_channels, kernel_size, rng, dtype)),
            ('bn2', BatchNorm2d(out_channels, momentum, eps, dtype)),
        ]))
        self.shortcut = None
        if in_channels != out_channels:
            self.shortcut = self.add_child('shortcut', Conv2d(in_channels, out_channels, 1, rng, dtype))
        self.relu = self.add_child('relu', ReLU())

    def forward(self, x):
        residual = self.shortcut.forward(x) if self.shortcut is not None else x
        return self.relu.forward(self.main.forward(x) + residual)

    def backward(self, grad):
        grad = self.relu.backward(grad)
        dx = self.main.backward(grad)
        if self.shortcut is not None:
            return dx + self.shortcut.backward(grad)
        return dx + grad


class DenseBlock(Sequential):
    """
    Stack of [Linear, ReLU, Dropout] layers acting on the last axis.
    """

    def __init__(self, in_features, width, rng, n_layers=DENSE_LAYERS, dropout=DROPOUT, dtype=np.float32):
        layers = []
        features = in_features
        for i in range(n_layers):
            layers += [
                (f'linear{i + 1}', Linear(features, width, rng, dtype)),
                (f'relu{i + 1}', ReLU()),
                (f'dropout{i + 1}', Dropout(dropout)),
            ]
            features = width
        super().__init__(layers)
        self.in_features = in_features
        self.out_features = features


def conv_block_apply(x, block, mode='train'):
    """Run a ConvBlock in the given mode; block.backward follows."""
    block.set_mode(mode)
    return block.forward(x)


def dense_block_apply(x, block, mode='train', rng=None):
    """Run a DenseBlock in the given mode; rng drives dropout in train mode."""
    block.set_mode(mode)
    if rng is not None:
        block.set_rng(rng)
    return block.forward(x)
