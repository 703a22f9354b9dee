"""
Random training crops.
"""
import numpy as np

from audio.wav import Waveform
from errors import InvalidCropError


def crop_length(crop_s, sample_rate):
    """Exact crop length in samples."""
    if not crop_s > 0:
        raise InvalidCropError(f"crop duration must be positive, got {crop_s}")
    return int(round(crop_s * sample_rate))


def crop_offset(n_samples, n_crop, rng):
    """
    Draw a crop start uniformly over the valid positions.

    Inputs shorter than the crop are tiled from sample 0, so the offset is 0
    and no random number is consumed.
    """
    if n_samples <= n_crop:
        return 0
    return int(rng.integers(0, n_samples - n_crop + 1))


def crop_samples(samples, offset, n_crop):
    """Cut n_crop samples starting at offset, tiling inputs that are too short."""
    if len(samples) < n_crop:
        reps = -(-n_crop // len(samples))
        return np.tile(samples, reps)[:n_crop]
    return samples[offset:offset + n_crop]


def random_crop_waveform(waveform, crop_s, rng):
    """
    Randomly crop a waveform to exactly crop_s seconds.

    Args:
        waveform (Waveform): Input waveform
        crop_s (float): Crop duration in seconds
        rng (numpy.random.Generator): Caller-owned seeded generator

    Returns:
        Waveform: Crop of round(crop_s * sample_rate) samples
    """
    n_crop = crop_length(crop_s, waveform.sample_rate)
    offset = crop_offset(len(waveform), n_crop, rng)
    return Waveform(crop_samples(waveform.samples, offset, n_crop), waveform.sample_rate)


def crop_events(events, offset_s, crop_s, duration_s):
    """
    Clip and shift event annotations into a crop window.

    Events of tiled inputs repeat once per tile.

    Args:
        events (iterable): (onset_s, offset_s, class) triples
        offset_s (float): Crop start in seconds
        crop_s (float): Crop duration in seconds
        duration_s (float): Source segment duration in seconds

    Returns:
        list: Events intersecting [offset_s, offset_s + crop_s), in crop time
    """
    window_end = offset_s + crop_s
    n_tiles = max(1, int(np.ceil(window_end / duration_s)))
    cropped = []
    for tile in range(n_tiles):
        shift = tile * duration_s
        for onset, offset, cls in events:
            start = max(onset + shift, offset_s)
            stop = min(offset + shift, window_end)
            if stop > start:
                cropped.append((start - offset_s, stop - offset_s, cls))
    return sorted(cropped)
