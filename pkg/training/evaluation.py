"""
Crop-free evaluation of a model on a task's evaluation manifest.
"""
import logging

import numpy as np

from analysis.report import prediction_record, score_predictions
from audio.wav import Waveform
from features.melspec import FeatureConfig, log_mel_spectrogram
from training.sampler import WaveformStore

logger = logging.getLogger(__name__)


def padded_features(waveform, model, feature_cfg):
    """
    Featurize a whole segment, tiling it when it yields too few frames.
    """
    min_frames = model.config.min_frames
    samples = waveform.samples
    needed = feature_cfg.win_length + (min_frames - 1) * feature_cfg.hop_length
    if len(samples) < needed:
        reps = -(-needed // len(samples))
        samples = np.tile(samples, reps)[:needed]
        logger.debug("Tiled a %d-sample segment to %d samples", len(waveform), needed)
    return log_mel_spectrogram(Waveform(samples, waveform.sample_rate), feature_cfg).values


def predict_entries(model, task, entries, root=None, store=None, feature_cfg=None):
    """
    Run the task head on every full segment.

    Returns:
        list: One prediction record per entry (see analysis.report.prediction_record)
    """
    store = store if store is not None else WaveformStore()
    feature_cfg = feature_cfg or FeatureConfig()
    records = []
    for entry in entries:
        x = padded_features(store.get(entry, root), model, feature_cfg)
        out = model.forward(x[None], active=(task,), mode='eval')
        if task == 'ASC':
            output = out.asc_logits[0]
        elif task == 'TAG':
            output = out.tag_probs[0]
        else:
            output = out.sed_roll[0]
        records.append(prediction_record(entry, task, output))
    return records


def evaluate_task(model, spec, store=None, feature_cfg=None, predictions=None):
    """
    Score a model on full, uncropped evaluation segments.

    Args:
        model (BaseModel): Model to evaluate (run in eval mode)
        spec (TaskSpec): Task; its eval manifest is used, else its manifest
        store (WaveformStore, optional): Audio cache
        feature_cfg (FeatureConfig, optional): Feature parameters
        predictions (list, optional): Receives the per-segment prediction records

    Returns:
        MetricReport: accuracy for ASC, lwlrap for TAG, f1 and er for SED
    """
    entries, root = spec.eval_entries
    records = predict_entries(model, spec.task, entries, root, store, feature_cfg)
    if predictions is not None:
        predictions.extend(records)
    report = score_predictions(spec.task, records, entries)
    logger.info("%s evaluation on %d segments: %s", spec.task, len(entries),
                ', '.join(f"{k}={v:.4f}" for k, v in report.metrics.items()))
    return report
