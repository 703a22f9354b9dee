"""
Log-mel spectrogram extraction.
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import librosa
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import signal

from config import HOP_MS, LOG_FLOOR, MEL_FMIN, N_FFT, N_MELS, SAMPLE_RATE, WIN_MS
from errors import ConfigError, InvalidWaveformError, SampleRateMismatchError, SegmentTooShortError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FeatureConfig:
    """
    STFT and mel filterbank parameters.

    Attributes:
        n_fft (int): FFT size; frames are zero-padded to it
        win_ms (float): Analysis window length in milliseconds
        hop_ms (float): Frame hop in milliseconds
        n_mels (int): Number of mel bands
        sample_rate (int): Expected input sample rate in Hz
        log_floor (float): Lower bound applied to mel power before the log
        fmin (float): Lowest filterbank edge in Hz
        fmax (float, optional): Highest filterbank edge in Hz (Nyquist when None)
    """
    n_fft: int = N_FFT
    win_ms: float = WIN_MS
    hop_ms: float = HOP_MS
    n_mels: int = N_MELS
    sample_rate: int = SAMPLE_RATE
    log_floor: float = LOG_FLOOR
    fmin: float = MEL_FMIN
    fmax: Optional[float] = None

    def __post_init__(self):
        if not self.win_ms > self.hop_ms > 0:
            raise ConfigError(f"need win_ms > hop_ms > 0, got {self.win_ms}, {self.hop_ms}")
        if self.n_mels > self.n_fft // 2 + 1:
            raise ConfigError(f"n_mels {self.n_mels} exceeds n_fft/2 + 1")
        if self.win_length > self.n_fft:
            raise ConfigError(f"window of {self.win_length} samples exceeds n_fft {self.n_fft}")
        if self.log_floor <= 0:
            raise ConfigError("log_floor must be positive")

    @property
    def win_length(self):
        """int: Window length in samples (960 at 24 kHz)."""
        return int(round(self.win_ms * self.sample_rate / 1000))

    @property
    def hop_length(self):
        """int: Hop length in samples (480 at 24 kHz)."""
        return int(round(self.hop_ms * self.sample_rate / 1000))

    @property
    def frame_hop_s(self):
        return self.hop_length / self.sample_rate

    @property
    def mel_fmax(self):
        return self.sample_rate / 2 if self.fmax is None else self.fmax

    def num_frames(self, n_samples):
        """Number of frames produced for n_samples (no center padding)."""
        if n_samples < self.win_length:
            return 0
        return (n_samples - self.win_length) // self.hop_length + 1


@dataclass(frozen=True)
class MelSpectrogram:
    """
    Log-mel feature matrix.

    Attributes:
        values (numpy.ndarray): frames x n_mels natural-log mel power
        frame_hop_s (float): Time between frames in seconds
    """
    values: np.ndarray
    frame_hop_s: float

    @property
    def num_frames(self):
        return self.values.shape[0]

    @property
    def num_bands(self):
        return self.values.shape[1]


@lru_cache(maxsize=8)
def mel_filterbank(sample_rate, n_fft, n_mels, fmin, fmax):
    """
    Triangular HTK-scale filterbank, shape (n_mels, n_fft // 2 + 1), unnormalized.
    """
    fb = librosa.filters.mel(sr=sample_rate, n_fft=n_fft, n_mels=n_mels, fmin=fmin, fmax=fmax,
                             htk=True, norm=None, dtype=np.float64)
    fb.setflags(write=False)
    return fb


def mel_band_centers(cfg):
    """numpy.ndarray: Center frequency in Hz of every mel band."""
    edges = librosa.mel_frequencies(n_mels=cfg.n_mels + 2, fmin=cfg.fmin, fmax=cfg.mel_fmax, htk=True)
    return edges[1:-1]


@lru_cache(maxsize=8)
def analysis_window(win_length):
    """Periodic Hann window."""
    window = signal.get_window('hann', win_length, fftbins=True)
    window.setflags(write=False)
    return window


def power_spectrogram(samples, cfg):
    """
    Framed power spectrum |STFT|^2.

    Args:
        samples (numpy.ndarray): 1-D signal of at least one window
        cfg (FeatureConfig): Feature parameters

    Returns:
        numpy.ndarray: frames x (n_fft // 2 + 1) power values
    """
    frames = sliding_window_view(samples, cfg.win_length)[::cfg.hop_length]
    spectrum = np.fft.rfft(frames * analysis_window(cfg.win_length), n=cfg.n_fft, axis=1)
    return spectrum.real ** 2 + spectrum.imag ** 2


def log_mel_spectrogram(waveform, cfg=None):
    """
    Compute the natural-log mel power spectrogram of a waveform.

    The first frame starts at sample 0; frames = floor((len - win) / hop) + 1.

    Args:
        waveform (Waveform): Input at cfg.sample_rate
        cfg (FeatureConfig, optional): Feature parameters (defaults when None)

    Returns:
        MelSpectrogram: frames x n_mels log-mel matrix
    """
    cfg = cfg or FeatureConfig()
    if waveform.sample_rate != cfg.sample_rate:
        raise SampleRateMismatchError(f"expected {cfg.sample_rate} Hz, got {waveform.sample_rate} Hz")
    if len(waveform) < cfg.win_length:
        raise SegmentTooShortError(f"segment of {len(waveform)} samples is shorter than one window "
                                   f"({cfg.win_length} samples)")
    if not np.all(np.isfinite(waveform.samples)):
        raise InvalidWaveformError("waveform contains non-finite samples")

    power = power_spectrogram(waveform.samples, cfg)
    fb = mel_filterbank(cfg.sample_rate, cfg.n_fft, cfg.n_mels, cfg.fmin, cfg.mel_fmax)
    mel_power = power @ fb.T
    values = np.log(np.maximum(mel_power, cfg.log_floor))
    return MelSpectrogram(values, cfg.frame_hop_s)
