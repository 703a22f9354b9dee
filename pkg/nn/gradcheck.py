"""
Central finite-difference gradient verification.
"""
import json
import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from config import GRADCHECK_REL_FLOOR, GRADCHECK_STEP, GRADCHECK_TOLERANCE
from errors import NonDeterministicLossError

logger = logging.getLogger(__name__)


@dataclass
class GradCheckReport:
    """
    Result of a finite-difference check.

    Attributes:
        max_rel_err (float): Largest relative error over all compared entries
        tolerance (float): Pass threshold
        table (pandas.DataFrame): One row per parameter with entries sampled,
            entries skipped at kinks, max_rel_err and max_abs_err
    """
    max_rel_err: float
    tolerance: float
    table: pd.DataFrame

    @property
    def passed(self):
        return self.max_rel_err <= self.tolerance

    @property
    def skipped(self):
        """Entries left out of max_rel_err because every step crossed a kink."""
        return int(self.table['skipped'].sum()) if not self.table.empty else 0

    @property
    def worst_parameter(self):
        if self.table.empty:
            return None
        return self.table.loc[self.table['max_rel_err'].idxmax(), 'parameter']

    def to_dict(self):
        return {
            'max_rel_err': float(self.max_rel_err),
            'tolerance': float(self.tolerance),
            'passed': bool(self.passed),
            'skipped': self.skipped,
            'parameters': json.loads(self.table.to_json(orient='records')),
        }


def relative_error(analytic, numeric, floor=GRADCHECK_REL_FLOOR):
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def activation_pattern(layer):
    """
    Snapshot of every ReLU mask and max-pool argmax under a layer.

    Two forward passes with equal patterns lie in the same linear region of
    the piecewise-smooth network.
    """
    pattern = []
    region = getattr(layer, 'activation_region', None)
    if region is not None:
        value = region()
        if value is not None:
            pattern.append(value.copy())
    for child in layer.children():
        pattern.extend(activation_pattern(child))
    return pattern


def same_pattern(a, b):
    return len(a) == len(b) and all(x.shape == y.shape and np.array_equal(x, y) for x, y in zip(a, b))


def finite_difference_check(loss_fn, params, tolerance=GRADCHECK_TOLERANCE, h=GRADCHECK_STEP,
                            max_entries=None, rng=None, pattern_fn=None):
    """
    Compare analytic gradients with central differences (f(p+h) - f(p-h)) / 2h.

    With pattern_fn, a difference whose perturbed passes leave the base
    activation pattern is retried with h / 10 and h / 100; entries that still
    straddle a ReLU or max-pool kink are skipped. Skipped entries are counted
    in the table's 'skipped' column and do not enter max_rel_err.

    Args:
        loss_fn (callable): loss_fn(backward) -> float. With backward=True it
            must also accumulate gradients into the parameters' grad buffers.
        params (list): Parameters to check
        tolerance (float): Maximum accepted relative error
        h (float): Finite-difference step
        max_entries (int, optional): Sample at most this many entries per
            parameter (all entries when None)
        rng (numpy.random.Generator, optional): Generator for entry sampling
        pattern_fn (callable, optional): Returns the activation pattern of the
            most recent loss_fn call (see activation_pattern)

    Returns:
        GradCheckReport: Per-parameter and overall errors
    """
    for param in params:
        param.zero_grad()
    base_loss = loss_fn(True)
    analytic = [param.grad.copy() for param in params]
    base_pattern = pattern_fn() if pattern_fn is not None else None
    repeat_loss = loss_fn(False)
    if base_loss != repeat_loss:
        raise NonDeterministicLossError(
            f"loss changed between identical evaluations ({base_loss!r} vs {repeat_loss!r})")

    def central_difference(param, idx, step):
        original = param.value[idx]
        try:
            param.value[idx] = original + step
            loss_plus = loss_fn(False)
            smooth = pattern_fn is None or same_pattern(pattern_fn(), base_pattern)
            param.value[idx] = original - step
            loss_minus = loss_fn(False)
            smooth = smooth and (pattern_fn is None or same_pattern(pattern_fn(), base_pattern))
        finally:
            param.value[idx] = original
        return (loss_plus - loss_minus) / (2 * step), smooth

    rng = rng if rng is not None else np.random.default_rng(0)
    rows = []
    for param, grad in zip(params, analytic):
        indices = np.arange(param.size)
        if max_entries is not None and param.size > max_entries:
            indices = np.sort(rng.choice(param.size, size=max_entries, replace=False))
        worst_rel, worst_abs, skipped = 0.0, 0.0, 0
        for flat_index in indices:
            idx = np.unravel_index(int(flat_index), param.shape)
            for step in (h, h / 10, h / 100):
                numeric, smooth = central_difference(param, idx, step)
                if smooth:
                    break
            if not smooth:
                skipped += 1
                continue
            a = float(grad[idx])
            worst_rel = max(worst_rel, relative_error(a, numeric))
            worst_abs = max(worst_abs, abs(a - numeric))
        rows.append({'parameter': param.name, 'entries': len(indices), 'skipped': skipped,
                     'max_rel_err': worst_rel, 'max_abs_err': worst_abs})
        logger.debug("gradcheck %s: %d entries, %d skipped, max rel err %.3e", param.name, len(indices),
                     skipped, worst_rel)

    table = pd.DataFrame(rows, columns=['parameter', 'entries', 'skipped', 'max_rel_err', 'max_abs_err'])
    max_rel = float(table['max_rel_err'].max()) if not table.empty else 0.0
    report = GradCheckReport(max_rel, tolerance, table)
    if report.skipped:
        logger.warning("gradcheck skipped %d entries that sit on a ReLU or max-pool kink", report.skipped)
    return report
