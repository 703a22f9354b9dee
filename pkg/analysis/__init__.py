"""
Evaluation metrics and metric reports.
"""

from analysis.metrics import (
    ScoreMatrix,
    SegmentRoll,
    accuracy,
    binarize_roll,
    lwlrap,
    sed_segment_metrics,
)
from analysis.report import MetricReport, score_predictions, write_report

__all__ = [
    'ScoreMatrix',
    'SegmentRoll',
    'accuracy',
    'binarize_roll',
    'lwlrap',
    'sed_segment_metrics',
    'MetricReport',
    'score_predictions',
    'write_report',
]
