"""
Random-crop mini-batch sampling.
"""
import logging
import threading
from collections import OrderedDict

import numpy as np

from audio.manifest import resolve_path
from audio.resample import resample_to_24k
from audio.wav import Waveform, load_wav
from config import WAVEFORM_CACHE_BYTES
from features.crop import crop_events, crop_length, crop_offset, crop_samples
from features.melspec import FeatureConfig, log_mel_spectrogram
from models.architecture import ArchitectureConfig
from models.labels import TaskLabels, events_to_roll, scene_one_hot, tags_multi_hot

logger = logging.getLogger(__name__)


class WaveformStore:
    """
    Thread-safe cache of decoded, resampled segments keyed by resolved path.

    Least recently used segments are evicted once the cached samples exceed
    max_bytes. Every lookup checks the entry's events against the segment
    duration.

    Args:
        max_bytes (int): Memory budget for cached samples
    """

    def __init__(self, max_bytes=WAVEFORM_CACHE_BYTES):
        self.max_bytes = max_bytes
        self.nbytes = 0
        self._cache = OrderedDict()
        self._lock = threading.Lock()

    def get(self, entry, root=None):
        path = resolve_path(entry, root)
        with self._lock:
            waveform = self._cache.get(path)
            if waveform is not None:
                self._cache.move_to_end(path)
        if waveform is None:
            waveform = resample_to_24k(load_wav(path))
            logger.debug("Loaded %s (%.2f s)", path, waveform.duration)
            self._insert(path, waveform)
        entry.check_duration(waveform.duration)
        return waveform

    def _insert(self, path, waveform):
        with self._lock:
            if path in self._cache:
                return
            self._cache[path] = waveform
            self.nbytes += waveform.samples.nbytes
            while self.nbytes > self.max_bytes and len(self._cache) > 1:
                evicted_path, evicted = self._cache.popitem(last=False)
                self.nbytes -= evicted.samples.nbytes
                logger.debug("Evicted %s from the waveform cache", evicted_path)

    def __contains__(self, path):
        return path in self._cache

    def __len__(self):
        return len(self._cache)


def entry_labels(entries, task, n_pooled=None, pooled_hop_s=None, events=None):
    """
    Stack the labels of a list of entries into TaskLabels.

    Args:
        entries (list): ManifestEntry objects of one task
        task (str): Task of the entries
        n_pooled (int): SED roll length
        pooled_hop_s (float): SED roll frame hop
        events (list, optional): Per-entry event lists overriding entry.events
            (cropped events)

    Returns:
        TaskLabels: Labels with only the task's field set
    """
    if task == 'ASC':
        return TaskLabels(scene=scene_one_hot([e.scene_id for e in entries]))
    if task == 'TAG':
        return TaskLabels(tags=tags_multi_hot([e.tags for e in entries]))
    events = events if events is not None else [e.events for e in entries]
    return TaskLabels(events=np.stack([events_to_roll(ev, n_pooled, pooled_hop_s) for ev in events]))


def sample_crop_batch(spec, rng, store=None, feature_cfg=None, arch=None):
    """
    Draw one random-crop mini-batch for a task.

    Segments are drawn uniformly with replacement, cropped to spec.crop_s
    (tiling shorter ones) and featurized. SED events are clipped and shifted
    into the crop window before rasterization at the pooled frame rate.

    Args:
        spec (TaskSpec): Task to sample
        rng (numpy.random.Generator): Caller-owned generator
        store (WaveformStore, optional): Audio cache
        feature_cfg (FeatureConfig, optional): Feature parameters
        arch (ArchitectureConfig, optional): Architecture giving the SED roll
            geometry (default pooling when None)

    Returns:
        tuple: (inputs of shape (batch, frames, n_mels) float32, TaskLabels)
    """
    entries = spec.entries
    store = store if store is not None else WaveformStore()
    feature_cfg = feature_cfg or FeatureConfig()
    arch = arch or ArchitectureConfig()

    picks = rng.integers(0, len(entries), size=spec.batch_size)
    chosen = [entries[i] for i in picks]
    inputs = []
    cropped_events = []
    for entry in chosen:
        waveform = store.get(entry, spec.root)
        n_crop = crop_length(spec.crop_s, waveform.sample_rate)
        offset = crop_offset(len(waveform), n_crop, rng)
        crop = Waveform(crop_samples(waveform.samples, offset, n_crop), waveform.sample_rate)
        inputs.append(log_mel_spectrogram(crop, feature_cfg).values.astype(np.float32))
        if spec.task == 'SED':
            cropped_events.append(crop_events(entry.events, offset / waveform.sample_rate, spec.crop_s,
                                              waveform.duration))

    x = np.stack(inputs)
    n_pooled = arch.pooled_frames(x.shape[1])
    labels = entry_labels(chosen, spec.task, n_pooled, arch.pooled_hop_s,
                          cropped_events if spec.task == 'SED' else None)
    return x, labels
