"""
Binary spectrogram cache.

Layout: magic b'LMEL', uint32 frames, uint32 bands, float64 hop_s, followed by
frames * bands little-endian float32 values in row-major order.
"""
import os
import struct

import numpy as np

from errors import FeatureCacheError
from features.melspec import MelSpectrogram

MAGIC = b'LMEL'
HEADER = struct.Struct('<4sIId')


def write_feature_cache(path, spec):
    """
    Write a spectrogram to the binary cache format.

    Args:
        path (str): Destination file
        spec (MelSpectrogram): Spectrogram to store
    """
    frames, bands = spec.values.shape
    directory = os.path.dirname(os.fspath(path))
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'wb') as f:
        f.write(HEADER.pack(MAGIC, frames, bands, spec.frame_hop_s))
        f.write(np.ascontiguousarray(spec.values, dtype='<f4').tobytes())


def read_feature_cache(path):
    """
    Read a spectrogram written by write_feature_cache.

    Returns:
        MelSpectrogram: Values as float32
    """
    with open(path, 'rb') as f:
        header = f.read(HEADER.size)
        if len(header) != HEADER.size:
            raise FeatureCacheError(f"{path}: truncated header")
        magic, frames, bands, hop_s = HEADER.unpack(header)
        if magic != MAGIC:
            raise FeatureCacheError(f"{path}: not a spectrogram cache")
        payload = f.read()
    if len(payload) != frames * bands * 4:
        raise FeatureCacheError(f"{path}: expected {frames * bands} values, found {len(payload) // 4}")
    values = np.frombuffer(payload, dtype='<f4').reshape(frames, bands).astype(np.float32)
    return MelSpectrogram(values, hop_s)
