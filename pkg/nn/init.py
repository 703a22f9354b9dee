"""
Weight initializers.
"""
import numpy as np


def kaiming_uniform(shape, fan_in, rng, dtype=np.float32):
    """He-uniform init for ReLU layers: U(-sqrt(6 / fan_in), sqrt(6 / fan_in))."""
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def orthogonal(rows, cols, rng, dtype=np.float32):
    """Matrix with orthonormal rows or columns (whichever is fewer)."""
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return q[:rows, :cols].astype(dtype)


def gate_orthogonal(n_gates, rows, cols, rng, dtype=np.float32):
    """Stack of independent orthogonal blocks, one per recurrent gate."""
    return np.concatenate([orthogonal(rows, cols, rng, dtype) for _ in range(n_gates)], axis=0)


def zeros(shape, dtype=np.float32):
    return np.zeros(shape, dtype=dtype)
