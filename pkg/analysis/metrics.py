"""
Task metrics: scene accuracy, lwlrap for tagging and segment-based SED scores.
"""
from dataclasses import dataclass

import numpy as np

from config import HOP_MS, SED_SEGMENT_S, SED_THRESHOLD
from errors import EmptyLabelSetError, InvalidArgumentError, MisalignedRollError, ShapeMismatchError

# Pooled SED frames are four 20 ms feature frames long
ROLL_UPSAMPLE = 4


def accuracy(pred_logits, truth):
    """
    Calculate scene classification accuracy.

    Ties in the logits go to the lowest class index.

    Args:
        pred_logits (array-like): samples x classes scores
        truth (array-like): True class index per sample

    Returns:
        float: Fraction of samples whose argmax equals the truth
    """
    pred_logits = np.asarray(pred_logits)
    truth = np.asarray(truth)
    if pred_logits.ndim != 2 or len(pred_logits) != len(truth) or len(truth) == 0:
        raise ShapeMismatchError(f"need a nonempty samples x classes matrix and one label per sample, "
                                 f"got {pred_logits.shape} and {truth.shape}")
    return float(np.mean(np.argmax(pred_logits, axis=1) == truth))


@dataclass
class ScoreMatrix:
    """
    Tagging scores with their true label sets.

    Attributes:
        scores (numpy.ndarray): samples x classes finite scores
        labels (numpy.ndarray): samples x classes boolean truth
    """
    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.labels = np.asarray(self.labels).astype(bool)
        if self.scores.ndim != 2 or self.scores.shape != self.labels.shape:
            raise ShapeMismatchError(f"scores {self.scores.shape} and labels {self.labels.shape} must match")
        if len(self.scores) == 0:
            raise ShapeMismatchError("score matrix needs at least one sample")
        if not np.all(np.isfinite(self.scores)):
            raise InvalidArgumentError("scores must be finite")

    @classmethod
    def from_label_sets(cls, scores, label_sets):
        scores = np.asarray(scores, dtype=np.float64)
        labels = np.zeros(scores.shape, dtype=bool)
        for i, classes in enumerate(label_sets):
            labels[i, list(classes)] = True
        return cls(scores, labels)


def lwlrap(s, exclude_empty=True):
    """
    Label-weighted label-ranking average precision.

    For each true label c of sample i the precision is the number of true
    labels scoring >= score(i, c) over the number of classes scoring
    >= score(i, c). The result averages over every (sample, true label) pair.

    Args:
        s (ScoreMatrix): Scores and truth
        exclude_empty (bool): Drop samples without true labels instead of raising

    Returns:
        float: lwlrap in [0, 1]
    """
    scores, labels = s.scores, s.labels
    has_labels = labels.any(axis=1)
    if not has_labels.all():
        if not exclude_empty:
            raise EmptyLabelSetError(f"{int((~has_labels).sum())} samples have no true labels")
        scores, labels = scores[has_labels], labels[has_labels]
    if len(scores) == 0:
        raise EmptyLabelSetError("no sample has a true label")

    # at_or_above[i, c, k]: class k scores at least as high as class c
    at_or_above = scores[:, None, :] >= scores[:, :, None]
    ranks = at_or_above.sum(axis=2)
    true_ranks = (at_or_above & labels[:, None, :]).sum(axis=2)
    precision = true_ranks / ranks
    return float(precision[labels].mean())


@dataclass
class SegmentRoll:
    """
    Binary frames x classes activity matrix.

    Attributes:
        values (numpy.ndarray): 0/1 matrix
        frame_hop_s (float): Frame hop in seconds
    """
    values: np.ndarray
    frame_hop_s: float

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim != 2:
            raise ShapeMismatchError(f"roll must be frames x classes, got {values.shape}")
        if not np.isin(values, (0, 1)).all():
            raise InvalidArgumentError("roll entries must be 0 or 1")
        self.values = values.astype(np.int8)

    @property
    def num_frames(self):
        return self.values.shape[0]

    @property
    def num_classes(self):
        return self.values.shape[1]


def binarize_roll(probs, threshold=SED_THRESHOLD, upsample=ROLL_UPSAMPLE, frame_hop_s=HOP_MS / 1000.0):
    """
    Threshold pooled SED probabilities and repeat each frame to the feature rate.

    Args:
        probs (array-like): pooled frames x classes probabilities
        threshold (float): Activity threshold in (0, 1); prob >= threshold is active
        upsample (int): Repetition factor
        frame_hop_s (float): Frame hop of the upsampled roll

    Returns:
        SegmentRoll: (frames * upsample) x classes roll
    """
    if not 0 < threshold < 1:
        raise InvalidArgumentError(f"threshold must be in (0, 1), got {threshold}")
    active = (np.asarray(probs) >= threshold).astype(np.int8)
    return SegmentRoll(np.repeat(active, upsample, axis=0), frame_hop_s)


def segment_activity(roll, segment_s=SED_SEGMENT_S):
    """Collapse a roll to segments; a class is active if any of its frames is."""
    frames_per_segment = int(round(segment_s / roll.frame_hop_s))
    n_segments = -(-roll.num_frames // frames_per_segment)
    padded = np.zeros((n_segments * frames_per_segment, roll.num_classes), dtype=np.int8)
    padded[:roll.num_frames] = roll.values
    return padded.reshape(n_segments, frames_per_segment, roll.num_classes).max(axis=1).astype(bool)


def sed_segment_counts(ref, pred, segment_s=SED_SEGMENT_S):
    """
    Pooled segment-level contingency counts.

    Returns:
        dict: tp, fp, fn, substitutions, deletions, insertions, n_ref
    """
    if ref.values.shape != pred.values.shape:
        raise MisalignedRollError(f"reference {ref.values.shape} and prediction {pred.values.shape} differ")
    if abs(ref.frame_hop_s - pred.frame_hop_s) > 1e-9:
        raise MisalignedRollError(f"frame hops differ: {ref.frame_hop_s} vs {pred.frame_hop_s}")
    r = segment_activity(ref, segment_s)
    p = segment_activity(pred, segment_s)
    fn_k = (r & ~p).sum(axis=1)
    fp_k = (~r & p).sum(axis=1)
    return {
        'tp': int((r & p).sum()),
        'fp': int(fp_k.sum()),
        'fn': int(fn_k.sum()),
        'substitutions': int(np.minimum(fn_k, fp_k).sum()),
        'deletions': int(np.maximum(0, fn_k - fp_k).sum()),
        'insertions': int(np.maximum(0, fp_k - fn_k).sum()),
        'n_ref': int(r.sum()),
    }


def sed_metrics_from_counts(counts):
    """
    F1 and error rate from pooled counts.

    ER divides by max(n_ref, 1); with nothing in either roll F1 is 1.
    """
    errors = counts['substitutions'] + counts['deletions'] + counts['insertions']
    er = errors / max(counts['n_ref'], 1)
    denom = 2 * counts['tp'] + counts['fp'] + counts['fn']
    f1 = 1.0 if denom == 0 else 2 * counts['tp'] / denom
    return {'f1': float(f1), 'er': float(er)}


def merge_counts(counts_list):
    merged = {}
    for counts in counts_list:
        for key, value in counts.items():
            merged[key] = merged.get(key, 0) + value
    return merged


def sed_segment_metrics(ref, pred, segment_s=SED_SEGMENT_S):
    """
    Segment-based F1 and error rate.

    Args:
        ref (SegmentRoll): Reference roll
        pred (SegmentRoll): Predicted roll at the same frame rate
        segment_s (float): Segment length in seconds

    Returns:
        dict: {'f1': float, 'er': float}
    """
    return sed_metrics_from_counts(sed_segment_counts(ref, pred, segment_s))
