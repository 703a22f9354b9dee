"""
Task label containers and SED event rasterization.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from config import NUM_EVENTS, NUM_SCENES, NUM_TAGS
from errors import InvalidArgumentError, ShapeMismatchError

# Fraction of a pooled frame an event must cover for the frame to be positive
ROLL_OVERLAP = 0.5


@dataclass
class TaskLabels:
    """
    Batched targets for the three tasks; absent tasks are None.

    Attributes:
        scene (numpy.ndarray): batch x 10 one-hot or soft scene vectors
        tags (numpy.ndarray): batch x 80 multi-hot or soft tag vectors
        events (numpy.ndarray): batch x T' x 14 event roll
    """
    scene: Optional[np.ndarray] = None
    tags: Optional[np.ndarray] = None
    events: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.scene is not None:
            if self.scene.ndim != 2 or self.scene.shape[1] != NUM_SCENES:
                raise ShapeMismatchError(f"scene labels must be batch x {NUM_SCENES}, got {self.scene.shape}")
            if not np.allclose(self.scene.sum(axis=1), 1.0, atol=1e-6):
                raise InvalidArgumentError("scene label rows must sum to 1")
        if self.tags is not None and (self.tags.ndim != 2 or self.tags.shape[1] != NUM_TAGS):
            raise ShapeMismatchError(f"tag labels must be batch x {NUM_TAGS}, got {self.tags.shape}")
        if self.events is not None and (self.events.ndim != 3 or self.events.shape[2] != NUM_EVENTS):
            raise ShapeMismatchError(f"event rolls must be batch x frames x {NUM_EVENTS}, got {self.events.shape}")

    def get(self, task):
        return {'ASC': self.scene, 'TAG': self.tags, 'SED': self.events}[task]

    def present_tasks(self):
        return tuple(task for task in ('ASC', 'TAG', 'SED') if self.get(task) is not None)

    def map(self, fn):
        """New TaskLabels with fn applied to every present field."""
        return TaskLabels(*(None if v is None else fn(v) for v in (self.scene, self.tags, self.events)))


def scene_one_hot(scene_ids, n_classes=NUM_SCENES, dtype=np.float32):
    scene_ids = np.asarray(scene_ids, dtype=np.int64)
    out = np.zeros((len(scene_ids), n_classes), dtype=dtype)
    out[np.arange(len(scene_ids)), scene_ids] = 1
    return out


def tags_multi_hot(tag_lists, n_classes=NUM_TAGS, dtype=np.float32):
    out = np.zeros((len(tag_lists), n_classes), dtype=dtype)
    for i, tags in enumerate(tag_lists):
        out[i, list(tags)] = 1
    return out


def events_to_roll(events, n_frames, frame_hop_s, n_classes=NUM_EVENTS, dtype=np.float32):
    """
    Rasterize (onset_s, offset_s, class) events into a binary roll.

    Frame j covers [j * hop, (j + 1) * hop) and is positive for a class when
    the event covers at least half of it.

    Args:
        events (iterable): Event triples in seconds
        n_frames (int): Roll length
        frame_hop_s (float): Frame hop of the roll (0.08 s for pooled frames)
        n_classes (int): Number of event classes

    Returns:
        numpy.ndarray: n_frames x n_classes roll of 0/1
    """
    roll = np.zeros((n_frames, n_classes), dtype=dtype)
    starts = np.arange(n_frames) * frame_hop_s
    for onset, offset, cls in events:
        overlap = np.minimum(offset, starts + frame_hop_s) - np.maximum(onset, starts)
        roll[overlap >= ROLL_OVERLAP * frame_hop_s - 1e-9, int(cls)] = 1
    return roll


def roll_to_events(roll, frame_hop_s, threshold=0.5):
    """
    Convert a roll back to (onset_s, offset_s, class) intervals, one per run.
    """
    active = np.asarray(roll) >= threshold
    events = []
    for cls in range(active.shape[1]):
        padded = np.concatenate([[False], active[:, cls], [False]])
        edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
        for start, stop in zip(edges[::2], edges[1::2]):
            events.append((start * frame_hop_s, stop * frame_hop_s, cls))
    return sorted(events)
