"""
Synthetic tone corpus for desk-scale training and tests.
"""
import logging
import os
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from audio.manifest import ManifestEntry
from audio.wav import Waveform, write_wav
from config import (
    NUM_EVENTS,
    NUM_SCENES,
    NUM_TAGS,
    RANDOM_SEED,
    SAMPLE_RATE,
    TOY_EVENT_CLASSES,
    TOY_EVENT_DURATION_RANGE,
    TOY_EVENTS_PER_SEGMENT,
    TOY_NOISE_LEVEL,
    TOY_SCENE_DURATION_S,
    TOY_SCENES,
    TOY_SED_DURATION_S,
    TOY_SED_SEGMENTS,
    TOY_SEGMENTS_PER_SCENE,
    TOY_TAG_DURATION_RANGE,
    TOY_TAG_SEGMENTS,
    TOY_TAGS,
)
from errors import ToySpecError

logger = logging.getLogger(__name__)

FADE_S = 0.01


@dataclass
class ToyCorpusSpec:
    """
    Generator configuration for the synthetic corpus.

    Each class of each task is a pure tone. A scene is a mixture of two scene
    tones, a tag segment holds the tones of its tag set for its whole duration,
    and a SED segment holds non-overlapping tone events at annotated intervals.

    Attributes:
        seed (int): Generator seed
        sample_rate (int): Output sample rate in Hz
        n_scenes (int): Number of scene classes
        segments_per_scene (int): ASC segments generated per scene
        scene_duration_s (float): ASC segment duration
        n_tags (int): Number of tag classes
        tag_segments (int): Number of TAG segments
        tag_duration_range (tuple): (min, max) TAG segment duration
        n_event_classes (int): Number of SED event classes
        sed_segments (int): Number of SED segments
        sed_duration_s (float): SED segment duration
        event_duration_range (tuple): (min, max) event duration
        events_per_segment (tuple): (min, max) events per SED segment
        noise_level (float): Standard deviation of the additive white noise
        scene_freqs (tuple, optional): 2 * n_scenes tone frequencies
        tag_freqs (tuple, optional): n_tags tone frequencies
        event_freqs (tuple, optional): n_event_classes tone frequencies
    """
    seed: int = RANDOM_SEED
    sample_rate: int = SAMPLE_RATE
    n_scenes: int = TOY_SCENES
    segments_per_scene: int = TOY_SEGMENTS_PER_SCENE
    scene_duration_s: float = TOY_SCENE_DURATION_S
    n_tags: int = TOY_TAGS
    tag_segments: int = TOY_TAG_SEGMENTS
    tag_duration_range: Tuple[float, float] = TOY_TAG_DURATION_RANGE
    n_event_classes: int = TOY_EVENT_CLASSES
    sed_segments: int = TOY_SED_SEGMENTS
    sed_duration_s: float = TOY_SED_DURATION_S
    event_duration_range: Tuple[float, float] = TOY_EVENT_DURATION_RANGE
    events_per_segment: Tuple[int, int] = TOY_EVENTS_PER_SEGMENT
    noise_level: float = TOY_NOISE_LEVEL
    scene_freqs: Optional[Tuple[float, ...]] = None
    tag_freqs: Optional[Tuple[float, ...]] = None
    event_freqs: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        for name, limit in (('n_scenes', NUM_SCENES), ('n_tags', NUM_TAGS), ('n_event_classes', NUM_EVENTS)):
            value = getattr(self, name)
            if not 1 <= value <= limit:
                raise ToySpecError(f"{name} must be in [1, {limit}], got {value}")
        for name in ('segments_per_scene', 'tag_segments', 'sed_segments'):
            if getattr(self, name) < 0:
                raise ToySpecError(f"{name} must be non-negative")
        if self.scene_duration_s <= 0 or self.sed_duration_s <= 0:
            raise ToySpecError("segment durations must be positive")
        for name in ('tag_duration_range', 'event_duration_range'):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ToySpecError(f"{name} must satisfy 0 < min <= max, got {(lo, hi)}")
        lo, hi = self.events_per_segment
        if not 1 <= lo <= hi:
            raise ToySpecError("events_per_segment must satisfy 1 <= min <= max")
        if self.sed_segments and hi * (self.event_duration_range[0] + 2 * FADE_S) > self.sed_duration_s:
            raise ToySpecError("SED segments are too short for the requested events")
        if self.noise_level < 0:
            raise ToySpecError("noise_level must be non-negative")

        nyquist = self.sample_rate / 2
        if self.scene_freqs is None:
            self.scene_freqs = tuple(np.geomspace(300.0, 6000.0, 2 * self.n_scenes).round(1))
        if self.tag_freqs is None:
            self.tag_freqs = tuple(np.geomspace(350.0, 7000.0, self.n_tags).round(1))
        if self.event_freqs is None:
            self.event_freqs = tuple(np.geomspace(500.0, 5000.0, self.n_event_classes).round(1))
        for name, count in (('scene_freqs', 2 * self.n_scenes), ('tag_freqs', self.n_tags),
                            ('event_freqs', self.n_event_classes)):
            freqs = getattr(self, name)
            if len(freqs) != count:
                raise ToySpecError(f"{name} needs {count} frequencies, got {len(freqs)}")
            if any(not 0 < f < nyquist for f in freqs):
                raise ToySpecError(f"{name} must lie in (0, {nyquist}) Hz")

    def scene_tones(self, scene):
        """tuple: The two tone frequencies mixed into a scene."""
        return self.scene_freqs[scene], self.scene_freqs[scene + self.n_scenes]


def _tone(freq, n_samples, sample_rate, rng):
    t = np.arange(n_samples) / sample_rate
    return np.sin(2 * np.pi * freq * t + rng.uniform(0, 2 * np.pi))


def _faded(x, sample_rate):
    fade = min(int(FADE_S * sample_rate), len(x) // 2)
    if fade > 0:
        ramp = np.linspace(0.0, 1.0, fade)
        x[:fade] *= ramp
        x[-fade:] *= ramp[::-1]
    return x


def _noise(spec, n_samples, rng):
    return spec.noise_level * rng.standard_normal(n_samples)


def _scene_segment(spec, scene, rng):
    n = int(round(spec.scene_duration_s * spec.sample_rate))
    x = _noise(spec, n, rng)
    for freq in spec.scene_tones(scene):
        x += rng.uniform(0.2, 0.3) * _tone(freq, n, spec.sample_rate, rng)
    return x


def _tag_segment(spec, rng):
    duration = rng.uniform(*spec.tag_duration_range)
    n = int(round(duration * spec.sample_rate))
    n_labels = int(rng.integers(1, min(3, spec.n_tags) + 1))
    tags = sorted(rng.choice(spec.n_tags, size=n_labels, replace=False).tolist())
    x = _noise(spec, n, rng)
    for tag in tags:
        x += 0.25 * _faded(_tone(spec.tag_freqs[tag], n, spec.sample_rate, rng), spec.sample_rate)
    return x, tags


def _sed_segment(spec, rng):
    n = int(round(spec.sed_duration_s * spec.sample_rate))
    x = _noise(spec, n, rng)
    n_events = int(rng.integers(spec.events_per_segment[0], spec.events_per_segment[1] + 1))
    slot = spec.sed_duration_s / n_events
    events = []
    for k in range(n_events):
        longest = min(spec.event_duration_range[1], slot - 2 * FADE_S)
        duration = rng.uniform(spec.event_duration_range[0], max(longest, spec.event_duration_range[0]))
        onset = round(k * slot + rng.uniform(0, max(slot - duration, 0.0)), 3)
        offset = round(min(onset + duration, (k + 1) * slot, spec.sed_duration_s), 3)
        cls = int(rng.integers(spec.n_event_classes))
        start, stop = int(round(onset * spec.sample_rate)), int(round(offset * spec.sample_rate))
        x[start:stop] += 0.5 * _faded(_tone(spec.event_freqs[cls], stop - start, spec.sample_rate, rng),
                                       spec.sample_rate)
        events.append((onset, offset, cls))
    return x, events


def synthesize_toy_dataset(spec, out_dir):
    """
    Generate the toy corpus as PCM16 WAV files.

    Args:
        spec (ToyCorpusSpec): Generator configuration
        out_dir (str): Directory receiving `asc/`, `tag/` and `sed/` subdirectories

    Returns:
        tuple: (files, entries) - written file paths and ManifestEntry objects whose
            paths are relative to out_dir
    """
    rng = np.random.default_rng(spec.seed)
    files, entries = [], []

    def emit(rel_path, samples, **labels):
        path = os.path.join(out_dir, rel_path)
        write_wav(path, Waveform(np.clip(samples, -1.0, 1.0), spec.sample_rate))
        files.append(path)
        entries.append(ManifestEntry(path=rel_path, **labels))

    for scene in range(spec.n_scenes):
        for i in range(spec.segments_per_scene):
            emit(f"asc/scene{scene}_{i:03d}.wav", _scene_segment(spec, scene, rng), task='ASC', scene_id=scene)

    for i in range(spec.tag_segments):
        samples, tags = _tag_segment(spec, rng)
        emit(f"tag/clip_{i:03d}.wav", samples, task='TAG', tags=tags)

    for i in range(spec.sed_segments):
        samples, events = _sed_segment(spec, rng)
        emit(f"sed/segment_{i:03d}.wav", samples, task='SED', events=events)

    logger.info("Synthesized %d toy segments into %s", len(files), out_dir)
    return files, entries
