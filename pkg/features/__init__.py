"""
Log-mel feature extraction and training crops.
"""

from features.melspec import FeatureConfig, MelSpectrogram, log_mel_spectrogram
from features.crop import crop_events, random_crop_waveform
from features.cache import read_feature_cache, write_feature_cache

__all__ = [
    'FeatureConfig',
    'MelSpectrogram',
    'log_mel_spectrogram',
    'crop_events',
    'random_crop_waveform',
    'read_feature_cache',
    'write_feature_cache',
]
