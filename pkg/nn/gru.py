"""
Gated recurrent units.

Gate layout follows the common (reset, update, new) ordering:

    r = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
    z = sigmoid(W_iz x + b_iz + W_hz h + b_hz)
    n = tanh(W_in x + b_in + r * (W_hn h + b_hn))
    h' = (1 - z) * n + z * h
"""
import numpy as np
from scipy.special import expit

from errors import ShapeMismatchError
from nn.base_layer import Layer
from nn.init import gate_orthogonal, zeros


class GRU(Layer):
    """
    Single-direction GRU over (batch, time, features) with zero initial state.

    Args:
        input_size (int): Feature dimension of the input
        hidden_size (int): Hidden state size H
        rng (numpy.random.Generator): Generator for weight init
        reverse (bool): Process the sequence from the last frame to the first
        dtype: Parameter dtype
    """

    def __init__(self, input_size, hidden_size, rng, reverse=False, dtype=np.float32):
        super().__init__()
        self.input_size = input_size
        self.hidden_size = hidden_size
        self.reverse = reverse
        self.w_ih = self.add_parameter('w_ih', gate_orthogonal(3, hidden_size, input_size, rng, dtype))
        self.w_hh = self.add_parameter('w_hh', gate_orthogonal(3, hidden_size, hidden_size, rng, dtype))
        self.b_ih = self.add_parameter('b_ih', zeros(3 * hidden_size, dtype))
        self.b_hh = self.add_parameter('b_hh', zeros(3 * hidden_size, dtype))
        self._cache = None

    def forward(self, x):
        if x.ndim != 3 or x.shape[-1] != self.input_size:
            raise ShapeMismatchError(f"GRU expects (batch, time, {self.input_size}), got {x.shape}")
        if self.reverse:
            x = x[:, ::-1]
        n_batch, n_steps, _ = x.shape
        hid = self.hidden_size
        gi = x @ self.w_ih.value.T + self.b_ih.value
        dtype = gi.dtype

        hs = np.zeros((n_batch, n_steps + 1, hid), dtype=dtype)
        r_all = np.empty((n_batch, n_steps, hid), dtype=dtype)
        z_all = np.empty_like(r_all)
        n_all = np.empty_like(r_all)
        ghn_all = np.empty_like(r_all)
        for t in range(n_steps):
            h_prev = hs[:, t]
            gh = h_prev @ self.w_hh.value.T + self.b_hh.value
            r = expit(gi[:, t, :hid] + gh[:, :hid])
            z = expit(gi[:, t, hid:2 * hid] + gh[:, hid:2 * hid])
            n = np.tanh(gi[:, t, 2 * hid:] + r * gh[:, 2 * hid:])
            hs[:, t + 1] = (1 - z) * n + z * h_prev
            r_all[:, t], z_all[:, t], n_all[:, t], ghn_all[:, t] = r, z, n, gh[:, 2 * hid:]

        self._cache = (x, hs, r_all, z_all, n_all, ghn_all)
        out = hs[:, 1:]
        return out[:, ::-1] if self.reverse else out

    def backward(self, grad):
        x, hs, r_all, z_all, n_all, ghn_all = self._cache
        if self.reverse:
            grad = grad[:, ::-1]
        n_batch, n_steps, hid = r_all.shape
        w_hh = self.w_hh.value

        dgi = np.empty((n_batch, n_steps, 3 * hid), dtype=grad.dtype)
        dh_next = np.zeros((n_batch, hid), dtype=grad.dtype)
        for t in reversed(range(n_steps)):
            r, z, n, ghn = r_all[:, t], z_all[:, t], n_all[:, t], ghn_all[:, t]
            h_prev = hs[:, t]
            dh = grad[:, t] + dh_next

            da_n = dh * (1 - z) * (1 - n * n)
            da_z = dh * (h_prev - n) * z * (1 - z)
            da_r = da_n * ghn * r * (1 - r)
            dgh = np.concatenate([da_r, da_z, da_n * r], axis=1)
            dgi[:, t] = np.concatenate([da_r, da_z, da_n], axis=1)

            self.w_hh.grad += dgh.T @ h_prev
            self.b_hh.grad += dgh.sum(axis=0)
            dh_next = dh * z + dgh @ w_hh

        flat_dgi = dgi.reshape(-1, 3 * hid)
        self.w_ih.grad += flat_dgi.T @ x.reshape(-1, self.input_size)
        self.b_ih.grad += flat_dgi.sum(axis=0)
        dx = dgi @ self.w_ih.value
        return dx[:, ::-1] if self.reverse else dx


class BiGRU(Layer):
    """
    Bidirectional GRU; output concatenates [forward, backward] states (2H).

    Each direction has its own parameters and a zero initial state.
    """

    def __init__(self, input_size, hidden_size, rng, dtype=np.float32):
        super().__init__()
        self.input_size = input_size
        self.hidden_size = hidden_size
        self.fwd = self.add_child('fwd', GRU(input_size, hidden_size, rng, reverse=False, dtype=dtype))
        self.bwd = self.add_child('bwd', GRU(input_size, hidden_size, rng, reverse=True, dtype=dtype))

    def forward(self, x):
        return np.concatenate([self.fwd.forward(x), self.bwd.forward(x)], axis=-1)

    def backward(self, grad):
        hid = self.hidden_size
        return self.fwd.backward(grad[..., :hid]) + self.bwd.backward(grad[..., hid:])


def bigru_apply(x, gru):
    """
    Run a BiGRU on a (time, features) sequence or a (batch, time, features) batch.
    """
    if x.ndim == 2:
        return gru.forward(x[None])[0]
    return gru.forward(x)
