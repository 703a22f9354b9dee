"""
Metric reports and scoring of exported predictions.
"""
import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from analysis.metrics import (ROLL_UPSAMPLE, ScoreMatrix, SegmentRoll, accuracy, binarize_roll, lwlrap,
                              merge_counts, sed_metrics_from_counts, sed_segment_counts)
from config import HOP_MS, SED_SEGMENT_S, SED_THRESHOLD, TASKS
from errors import ManifestError, MetricTaskMismatchError
from models.labels import events_to_roll

logger = logging.getLogger(__name__)

TASK_METRICS = {'ASC': ('accuracy',), 'TAG': ('lwlrap',), 'SED': ('f1', 'er')}


@dataclass
class MetricReport:
    """
    Metrics of one task on one evaluation set.

    Attributes:
        task (str): Evaluated task
        metrics (dict): Metric name -> value, exactly the task's metrics
        n_segments (int): Number of scored segments
        extra (dict): Additional context (e.g. SED contingency counts)
    """
    task: str
    metrics: dict
    n_segments: int
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.task not in TASK_METRICS:
            raise MetricTaskMismatchError(f"unknown task {self.task!r}")
        if tuple(sorted(self.metrics)) != tuple(sorted(TASK_METRICS[self.task])):
            raise MetricTaskMismatchError(
                f"{self.task} reports {TASK_METRICS[self.task]}, got {sorted(self.metrics)}")

    def to_dict(self):
        return {'task': self.task, 'n_segments': self.n_segments, **self.metrics, **self.extra}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_text(self):
        """Aligned two-column table under a framed title."""
        rows = [(name, f"{value:.4f}") for name, value in self.metrics.items()]
        rows.append(('segments', str(self.n_segments)))
        table = pd.DataFrame(rows, columns=['metric', 'value']).to_string(index=False)
        return f"=== {self.task} EVALUATION ===\n{table}\n"


def write_report(reports, path):
    """Write one JSON object per report (JSON Lines)."""
    directory = os.path.dirname(os.fspath(path))
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        for report in reports:
            f.write(report.to_json() + '\n')


def prediction_record(entry, task, output):
    """
    JSON-ready prediction of one segment.

    ASC stores logits, TAG probabilities, SED the pooled probability roll.
    """
    record = {'path': entry.path, 'task': task}
    if task == 'SED':
        record['roll'] = np.asarray(output, dtype=np.float64).tolist()
        record['frame_hop_s'] = HOP_MS / 1000.0 * ROLL_UPSAMPLE
    else:
        record['scores'] = np.asarray(output, dtype=np.float64).tolist()
    return record


def write_predictions(records, path):
    directory = os.path.dirname(os.fspath(path))
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        for record in records:
            f.write(json.dumps(record, sort_keys=True) + '\n')


def read_predictions(path):
    if not os.path.isfile(path):
        raise ManifestError(f"no such prediction file: {path}")
    with open(path, 'r', encoding='utf-8') as f:
        return [json.loads(line) for line in f if line.strip()]


def score_predictions(task, records, entries, threshold=SED_THRESHOLD, segment_s=SED_SEGMENT_S):
    """
    Score per-segment predictions against manifest labels.

    Args:
        task (str): Task the predictions belong to
        records (list): Prediction records (see prediction_record)
        entries (list): ManifestEntry objects with the reference labels
        threshold (float): SED activity threshold
        segment_s (float): SED segment length

    Returns:
        MetricReport: The task's metrics
    """
    if task not in TASKS:
        raise MetricTaskMismatchError(f"unknown task {task!r}")
    by_path = {}
    for record in records:
        if record.get('task') != task:
            raise MetricTaskMismatchError(f"{record.get('path')}: {record.get('task')} prediction scored as {task}")
        by_path[record['path']] = record
    missing = [e.path for e in entries if e.path not in by_path]
    if missing:
        raise ManifestError(f"no prediction for {len(missing)} entries (first: {missing[0]})")
    if not entries:
        raise ManifestError("nothing to score")

    if task == 'ASC':
        logits = np.array([by_path[e.path]['scores'] for e in entries])
        metrics = {'accuracy': accuracy(logits, [e.scene_id for e in entries])}
        return MetricReport(task, metrics, len(entries))
    if task == 'TAG':
        scores = np.array([by_path[e.path]['scores'] for e in entries])
        metrics = {'lwlrap': lwlrap(ScoreMatrix.from_label_sets(scores, [e.tags for e in entries]))}
        return MetricReport(task, metrics, len(entries))

    feature_hop_s = HOP_MS / 1000.0
    counts = []
    for e in entries:
        record = by_path[e.path]
        upsample = int(round(record['frame_hop_s'] / feature_hop_s))
        pred = binarize_roll(np.array(record['roll']), threshold, upsample, feature_hop_s)
        ref = SegmentRoll(events_to_roll(e.events, pred.num_frames, feature_hop_s, pred.num_classes), feature_hop_s)
        counts.append(sed_segment_counts(ref, pred, segment_s))
    merged = merge_counts(counts)
    return MetricReport(task, sed_metrics_from_counts(merged), len(entries), {'counts': merged})
