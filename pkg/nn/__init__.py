"""
Numpy network kernels with hand-written backward passes.
"""
from nn.base_layer import Layer, Parameter, Sequential
from nn.blocks import ConvBlock, DenseBlock, ResidualBlock, conv_block_apply, dense_block_apply
from nn.gradcheck import GradCheckReport, activation_pattern, finite_difference_check
from nn.gru import GRU, BiGRU, bigru_apply
from nn.layers import BatchNorm2d, Conv2d, Dropout, Linear, MaxPool2d, ReLU
from nn.optim import Adam, AdamState, adam_step

__all__ = [
    'Layer', 'Parameter', 'Sequential',
    'Conv2d', 'BatchNorm2d', 'ReLU', 'MaxPool2d', 'Linear', 'Dropout',
    'ConvBlock', 'ResidualBlock', 'DenseBlock', 'conv_block_apply', 'dense_block_apply',
    'GRU', 'BiGRU', 'bigru_apply',
    'Adam', 'AdamState', 'adam_step',
    'GradCheckReport', 'activation_pattern', 'finite_difference_check',
]
