"""
Primitive layers: convolution, batch normalization, pooling, dense, dropout.

Tensors follow the (batch, channels, time, freq) layout for 2-D layers;
Linear acts on the last axis of any array.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from config import BN_EPS, BN_MOMENTUM
from errors import InvalidArgumentError, LayerStateError, RunningStatsUnsetError, ShapeMismatchError
from nn.base_layer import Layer
from nn.init import kaiming_uniform, zeros


def _check_4d(x, channels, layer_name):
    if x.ndim != 4:
        raise ShapeMismatchError(f"{layer_name} expects a 4-D (batch, channels, time, freq) input, "
                                 f"got shape {x.shape}")
    if x.shape[1] != channels:
        raise ShapeMismatchError(f"{layer_name} expects {channels} channels, got {x.shape[1]}")


class Conv2d(Layer):
    """
    Same-padded stride-1 2-D convolution (odd square kernel).

    Args:
        in_channels (int): Input channel count
        out_channels (int): Output channel count
        kernel_size (int): Odd kernel size; padding is kernel_size // 2
        rng (numpy.random.Generator): Generator for weight init
        dtype: Parameter dtype
    """

    def __init__(self, in_channels, out_channels, kernel_size, rng, dtype=np.float32):
        super().__init__()
        if kernel_size % 2 != 1:
            raise InvalidArgumentError(f"kernel_size must be odd, got {kernel_size}")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        fan_in = in_channels * kernel_size * kernel_size
        self.weight = self.add_parameter(
            'weight', kaiming_uniform((out_channels, in_channels, kernel_size, kernel_size), fan_in, rng, dtype))
        self.bias = self.add_parameter('bias', zeros(out_channels, dtype))
        self._cache = None

    def forward(self, x):
        _check_4d(x, self.in_channels, 'Conv2d')
        n, c, h, w = x.shape
        k = self.kernel_size
        pad = k // 2
        padded = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
        windows = sliding_window_view(padded, (k, k), axis=(2, 3))
        cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * h * w, c * k * k)
        kernel = self.weight.value.reshape(self.out_channels, -1)
        out = cols @ kernel.T + self.bias.value
        self._cache = (x.shape, cols)
        return out.reshape(n, h, w, self.out_channels).transpose(0, 3, 1, 2)

    def backward(self, grad):
        (n, c, h, w), cols = self._cache
        k = self.kernel_size
        pad = k // 2
        g = grad.transpose(0, 2, 3, 1).reshape(n * h * w, self.out_channels)
        self.weight.grad += (g.T @ cols).reshape(self.weight.shape)
        self.bias.grad += g.sum(axis=0)

        dcols = (g @ self.weight.value.reshape(self.out_channels, -1)).reshape(n, h, w, c, k, k)
        dpadded = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=grad.dtype)
        for i in range(k):
            for j in range(k):
                dpadded[:, :, i:i + h, j:j + w] += dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        return dpadded[:, :, pad:pad + h, pad:pad + w]


class BatchNorm2d(Layer):
    """
    Per-channel batch normalization over (batch, time, freq).

    Train mode normalizes with biased batch statistics and updates the running
    averages as running = momentum * running + (1 - momentum) * batch. Eval
    mode uses the running statistics, which must have been set or updated.

    Args:
        channels (int): Channel count
        momentum (float): Weight of the old running value
        eps (float): Variance floor
        dtype: Parameter dtype
    """

    def __init__(self, channels, momentum=BN_MOMENTUM, eps=BN_EPS, dtype=np.float32):
        super().__init__()
        self.channels = channels
        self.momentum = momentum
        self.eps = eps
        self.gamma = self.add_parameter('gamma', np.ones(channels, dtype=dtype))
        self.beta = self.add_parameter('beta', zeros(channels, dtype))
        self.add_buffer('running_mean', zeros(channels, dtype))
        self.add_buffer('running_var', np.ones(channels, dtype=dtype))
        self.add_buffer('num_batches_tracked', np.zeros(1, dtype=np.int64))
        self._cache = None

    @property
    def running_mean(self):
        return self._buffers['running_mean']

    @property
    def running_var(self):
        return self._buffers['running_var']

    @property
    def stats_tracked(self):
        return int(self._buffers['num_batches_tracked'][0]) > 0

    def set_running_stats(self, mean, var):
        """Install running statistics directly (e.g. from a reference model)."""
        dtype = self.gamma.value.dtype
        self._buffers['running_mean'] = np.array(mean, dtype=dtype).reshape(self.channels)
        self._buffers['running_var'] = np.array(var, dtype=dtype).reshape(self.channels)
        self._buffers['num_batches_tracked'] = np.maximum(self._buffers['num_batches_tracked'], 1)

    def forward(self, x):
        _check_4d(x, self.channels, 'BatchNorm2d')
        if self.training:
            mean = x.mean(axis=(0, 2, 3))
            var = x.var(axis=(0, 2, 3))
            m = self.momentum
            self._buffers['running_mean'] = (m * self.running_mean + (1 - m) * mean).astype(self.running_mean.dtype)
            self._buffers['running_var'] = (m * self.running_var + (1 - m) * var).astype(self.running_var.dtype)
            self._buffers['num_batches_tracked'] = self._buffers['num_batches_tracked'] + 1
        else:
            if not self.stats_tracked:
                raise RunningStatsUnsetError("BatchNorm2d in eval mode before running statistics were set")
            mean = self.running_mean
            var = self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        x_hat = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
        self._cache = (x_hat, inv_std, self.training)
        return self.gamma.value[None, :, None, None] * x_hat + self.beta.value[None, :, None, None]

    def backward(self, grad):
        x_hat, inv_std, batch_stats = self._cache
        self.gamma.grad += (grad * x_hat).sum(axis=(0, 2, 3))
        self.beta.grad += grad.sum(axis=(0, 2, 3))
        dx_hat = grad * self.gamma.value[None, :, None, None]
        if not batch_stats:
            return dx_hat * inv_std[None, :, None, None]
        count = grad.shape[0] * grad.shape[2] * grad.shape[3]
        sum_dx_hat = dx_hat.sum(axis=(0, 2, 3), keepdims=True)
        sum_dx_hat_x_hat = (dx_hat * x_hat).sum(axis=(0, 2, 3), keepdims=True)
        return (inv_std[None, :, None, None] / count) * (count * dx_hat - sum_dx_hat - x_hat * sum_dx_hat_x_hat)


class ReLU(Layer):

    def __init__(self):
        super().__init__()
        self._mask = None

    def forward(self, x):
        self._mask = x > 0
        return np.where(self._mask, x, 0).astype(x.dtype, copy=False)

    def backward(self, grad):
        return np.where(self._mask, grad, 0).astype(grad.dtype, copy=False)

    def activation_region(self):
        return self._mask


class MaxPool2d(Layer):
    """
    Non-overlapping max pooling over (time, freq) with floor cropping.

    Gradient flows to the first maximum of each window.

    Args:
        pool (tuple): (time_pool, freq_pool)
    """

    def __init__(self, pool):
        super().__init__()
        self.pool = tuple(int(p) for p in pool)
        self._cache = None

    def forward(self, x):
        if x.ndim != 4:
            raise ShapeMismatchError(f"MaxPool2d expects a 4-D input, got shape {x.shape}")
        ph, pw = self.pool
        if ph == 1 and pw == 1:
            self._cache = None
            return x
        n, c, h, w = x.shape
        ho, wo = h // ph, w // pw
        if ho == 0 or wo == 0:
            raise ShapeMismatchError(f"input {h}x{w} is smaller than the pool {ph}x{pw}")
        windows = (x[:, :, :ho * ph, :wo * pw]
                   .reshape(n, c, ho, ph, wo, pw)
                   .transpose(0, 1, 2, 4, 3, 5)
                   .reshape(n, c, ho, wo, ph * pw))
        idx = windows.argmax(axis=-1)
        self._cache = (x.shape, idx)
        return np.take_along_axis(windows, idx[..., None], axis=-1)[..., 0]

    def activation_region(self):
        return None if self._cache is None else self._cache[1]

    def backward(self, grad):
        if self._cache is None:
            return grad
        (n, c, h, w), idx = self._cache
        ph, pw = self.pool
        ho, wo = grad.shape[2], grad.shape[3]
        dwindows = np.zeros((n, c, ho, wo, ph * pw), dtype=grad.dtype)
        np.put_along_axis(dwindows, idx[..., None], grad[..., None], axis=-1)
        dx = np.zeros((n, c, h, w), dtype=grad.dtype)
        dx[:, :, :ho * ph, :wo * pw] = (dwindows
                                        .reshape(n, c, ho, wo, ph, pw)
                                        .transpose(0, 1, 2, 4, 3, 5)
                                        .reshape(n, c, ho * ph, wo * pw))
        return dx


class Linear(Layer):
    """
    Affine map on the last axis: y = x @ W + b, W of shape (in, out).
    """

    def __init__(self, in_features, out_features, rng, dtype=np.float32):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        self.weight = self.add_parameter('weight',
                                         kaiming_uniform((in_features, out_features), in_features, rng, dtype))
        self.bias = self.add_parameter('bias', zeros(out_features, dtype))
        self._x = None

    def forward(self, x):
        if x.shape[-1] != self.in_features:
            raise ShapeMismatchError(f"Linear expects {self.in_features} input features, got {x.shape[-1]}")
        self._x = x
        return x @ self.weight.value + self.bias.value

    def backward(self, grad):
        x2 = self._x.reshape(-1, self.in_features)
        g2 = grad.reshape(-1, self.out_features)
        self.weight.grad += x2.T @ g2
        self.bias.grad += g2.sum(axis=0)
        return grad @ self.weight.value.T


class Dropout(Layer):
    """
    Inverted dropout; identity in eval mode or with rate 0.
    """

    def __init__(self, rate):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise InvalidArgumentError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self._mask = None

    def forward(self, x):
        if not self.training or self.rate == 0.0:
            self._mask = None
            return x
        if self.rng is None:
            raise LayerStateError("Dropout in train mode needs a generator; call set_rng first")
        keep = self.rng.random(x.shape) >= self.rate
        self._mask = (keep / (1.0 - self.rate)).astype(x.dtype)
        return x * self._mask

    def backward(self, grad):
        if self._mask is None:
            return grad
        return grad * self._mask
