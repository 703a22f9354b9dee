"""
Mix-up augmentation.
"""
import numpy as np

from config import MIXUP_ALPHA
from errors import MixupBatchError


def mixup_batch(inputs, labels, rng, alpha=MIXUP_ALPHA, lam=None):
    """
    Mix every example with a partner from a shuffled copy of the batch.

    Inputs and every present label field become lam * a + (1 - lam) * b with
    lam ~ Beta(alpha, alpha).

    Args:
        inputs (numpy.ndarray): Batch of spectrograms
        labels (TaskLabels): Batch targets
        rng (numpy.random.Generator): Generator for lam and the pairing
        alpha (float): Beta distribution parameter
        lam (float, optional): Fixed mixing weight instead of a draw

    Returns:
        tuple: (mixed inputs, mixed labels, lam, permutation)
    """
    n = len(inputs)
    if n < 2:
        raise MixupBatchError(f"Mix-up needs a batch of at least 2, got {n}")
    if not alpha > 0:
        raise MixupBatchError(f"alpha must be positive, got {alpha}")
    if lam is None:
        lam = float(rng.beta(alpha, alpha))
    perm = rng.permutation(n)
    if lam == 1.0:
        return inputs.copy(), labels.map(np.copy), lam, perm

    def mix(a):
        return (lam * a + (1 - lam) * a[perm]).astype(a.dtype)

    return mix(inputs), labels.map(mix), lam, perm
