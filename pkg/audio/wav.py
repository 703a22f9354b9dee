"""
WAV reading and writing.
"""
import logging
import os
from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile

from config import PCM16_SCALE
from errors import (
    AudioFileNotFoundError,
    EmptyAudioError,
    InvalidWaveformError,
    UnsupportedEncodingError,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Waveform:
    """
    Mono sample buffer with its sample rate.

    Attributes:
        samples (numpy.ndarray): 1-D float64 amplitudes
        sample_rate (int): Sample rate in Hz
    """
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise InvalidWaveformError(f"waveform must be mono, got shape {samples.shape}")
        if not isinstance(self.sample_rate, (int, np.integer)) or self.sample_rate <= 0:
            raise InvalidWaveformError(f"sample rate must be a positive integer, got {self.sample_rate!r}")
        if not np.all(np.isfinite(samples)):
            raise InvalidWaveformError("waveform contains non-finite samples")
        object.__setattr__(self, 'samples', samples)
        object.__setattr__(self, 'sample_rate', int(self.sample_rate))

    @property
    def duration(self):
        """float: Duration in seconds."""
        return len(self.samples) / self.sample_rate

    def __len__(self):
        return len(self.samples)


def load_wav(path):
    """
    Load a PCM16 or float32 WAV file as a mono waveform.

    16-bit values are scaled by 1/32768, stereo is averaged to mono and float
    samples are clipped to [-1, 1].

    Args:
        path (str or os.PathLike): WAV file location

    Returns:
        Waveform: The decoded waveform at the file's sample rate
    """
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise AudioFileNotFoundError(f"no such audio file: {path}")

    try:
        sample_rate, data = wavfile.read(path)
    except ValueError as exc:
        raise UnsupportedEncodingError(f"{path}: {exc}") from exc

    if data.dtype == np.int16:
        samples = data.astype(np.float64) / PCM16_SCALE
    elif data.dtype == np.float32:
        samples = np.clip(data.astype(np.float64), -1.0, 1.0)
    else:
        raise UnsupportedEncodingError(f"{path}: unsupported sample type {data.dtype}")

    if samples.ndim == 2:
        if samples.shape[1] > 2:
            raise UnsupportedEncodingError(f"{path}: {samples.shape[1]} channels, expected 1 or 2")
        samples = samples.mean(axis=1)

    if samples.size == 0:
        raise EmptyAudioError(f"{path}: zero-length payload")

    logger.debug("Loaded %s (%d samples @ %d Hz)", path, samples.size, sample_rate)
    return Waveform(samples, int(sample_rate))


def write_wav(path, waveform, encoding='pcm16'):
    """
    Write a waveform as a mono WAV file.

    Args:
        path (str or os.PathLike): Destination file
        waveform (Waveform): Waveform to write
        encoding (str): 'pcm16' or 'float32'
    """
    if encoding == 'pcm16':
        scaled = np.round(waveform.samples * PCM16_SCALE)
        data = np.clip(scaled, -32768, 32767).astype(np.int16)
    elif encoding == 'float32':
        data = waveform.samples.astype(np.float32)
    else:
        raise UnsupportedEncodingError(f"unknown encoding {encoding!r}")

    directory = os.path.dirname(os.fspath(path))
    if directory:
        os.makedirs(directory, exist_ok=True)
    wavfile.write(os.fspath(path), waveform.sample_rate, data)
