"""
Audio ingestion, resampling, manifests and toy corpus synthesis.
"""

from audio.wav import Waveform, load_wav, write_wav
from audio.resample import resample_to_24k
from audio.manifest import ManifestEntry, load_manifest, write_manifest
from audio.synth import ToyCorpusSpec, synthesize_toy_dataset

__all__ = [
    'Waveform',
    'load_wav',
    'write_wav',
    'resample_to_24k',
    'ManifestEntry',
    'load_manifest',
    'write_manifest',
    'ToyCorpusSpec',
    'synthesize_toy_dataset',
]
