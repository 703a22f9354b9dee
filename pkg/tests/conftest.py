"""
Shared fixtures: tiny architectures and a small synthetic corpus.
"""
import os

import numpy as np
import pytest

from audio.manifest import write_manifest
from audio.synth import ToyCorpusSpec, synthesize_toy_dataset
from models.architecture import tiny_config


def small_corpus_spec(seed=7):
    """A corpus small enough to featurize in well under a second."""
    return ToyCorpusSpec(seed=seed, n_scenes=2, segments_per_scene=3, scene_duration_s=1.0, n_tags=3,
                         tag_segments=4, tag_duration_range=(0.5, 1.0), n_event_classes=2, sed_segments=2,
                         sed_duration_s=3.0, event_duration_range=(0.3, 0.6), events_per_segment=(1, 2))


def write_corpus(spec, out_dir):
    """Synthesize a corpus and write one manifest per task; returns {task: manifest path}."""
    _, entries = synthesize_toy_dataset(spec, out_dir)
    manifests = {}
    for task in ('ASC', 'TAG', 'SED'):
        path = os.path.join(out_dir, f"{task.lower()}.jsonl")
        write_manifest([e for e in entries if e.task == task], path)
        manifests[task] = path
    return manifests


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(params=['v1', 'v2', 'v3'])
def variant(request):
    return request.param


@pytest.fixture
def tiny_cfg():
    return tiny_config('v3')


@pytest.fixture
def toy_corpus(tmp_path):
    """Small train and eval corpora; returns {'train': {task: path}, 'eval': {task: path}}."""
    return {
        'train': write_corpus(small_corpus_spec(seed=7), str(tmp_path / 'train')),
        'eval': write_corpus(small_corpus_spec(seed=8), str(tmp_path / 'eval')),
    }


@pytest.fixture
def default_toy_corpus(tmp_path):
    """The default toy corpus (seed 0 for training, 1 for evaluation)."""
    return {
        'train': write_corpus(ToyCorpusSpec(seed=0), str(tmp_path / 'train')),
        'eval': write_corpus(ToyCorpusSpec(seed=1), str(tmp_path / 'eval')),
    }
