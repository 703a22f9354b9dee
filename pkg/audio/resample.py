"""
Band-limited resampling to the 24 kHz model rate.
"""
import logging
from functools import lru_cache
from math import gcd

import numpy as np
from scipy import signal

from audio.wav import Waveform
from config import RESAMPLE_KAISER_BETA, RESAMPLE_TAPS_PER_PHASE, SAMPLE_RATE

logger = logging.getLogger(__name__)


@lru_cache(maxsize=16)
def polyphase_filter(up, down):
    """
    Design the Kaiser-windowed sinc prototype for an up/down rate pair.

    The prototype has 64 taps per polyphase branch (plus one for symmetry) and
    cuts off at the narrower of the two Nyquist bands.

    Args:
        up (int): Interpolation factor
        down (int): Decimation factor

    Returns:
        numpy.ndarray: Filter taps
    """
    numtaps = RESAMPLE_TAPS_PER_PHASE * up + 1
    cutoff = 1.0 / max(up, down)
    taps = signal.firwin(numtaps, cutoff, window=('kaiser', RESAMPLE_KAISER_BETA))
    taps.setflags(write=False)
    return taps


def resample(waveform, target_rate):
    """
    Resample a waveform with a polyphase windowed-sinc filter.

    Args:
        waveform (Waveform): Input waveform
        target_rate (int): Output sample rate in Hz

    Returns:
        Waveform: The input itself when the rates already match, else a new waveform
    """
    if waveform.sample_rate == target_rate:
        return waveform

    g = gcd(waveform.sample_rate, target_rate)
    up, down = target_rate // g, waveform.sample_rate // g
    taps = polyphase_filter(up, down)
    out = signal.resample_poly(waveform.samples, up, down, window=taps)

    logger.debug("Resampled %d -> %d Hz (up=%d, down=%d)", waveform.sample_rate, target_rate, up, down)
    return Waveform(out, target_rate)


def resample_to_24k(waveform):
    """Resample to the 24 kHz rate every feature is computed at."""
    return resample(waveform, SAMPLE_RATE)
