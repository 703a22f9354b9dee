"""
Task and schedule specifications for training runs.
"""
import os
from dataclasses import dataclass, field
from typing import Optional

from audio.manifest import load_manifest
from config import (BATCH_SIZE_ASC, BATCH_SIZE_SED, BATCH_SIZE_TAG, CROP_S_ASC, CROP_S_SED, CROP_S_TAG, EPOCHS,
                    ITERATIONS_PER_EPOCH, LEARNING_RATE, RANDOM_SEED, TASKS)
from errors import ConfigError, EmptyManifestError, ManifestError

DEFAULT_BATCH_SIZES = {'ASC': BATCH_SIZE_ASC, 'TAG': BATCH_SIZE_TAG, 'SED': BATCH_SIZE_SED}
DEFAULT_CROPS = {'ASC': CROP_S_ASC, 'TAG': CROP_S_TAG, 'SED': CROP_S_SED}


@dataclass
class TaskSpec:
    """
    One task's data source and batch geometry.

    Attributes:
        task (str): 'ASC', 'TAG' or 'SED'
        manifest (list or str): Training ManifestEntry list, or a manifest path
        batch_size (int): Examples per iteration
        crop_s (float): Random crop length in seconds
        eval_manifest (list or str, optional): Validation/evaluation entries
        root (str, optional): Directory entry paths are relative to
            (defaults to the manifest's directory when a path is given)
    """
    task: str
    manifest: object
    batch_size: Optional[int] = None
    crop_s: Optional[float] = None
    eval_manifest: object = None
    root: Optional[str] = None
    eval_root: Optional[str] = field(default=None, repr=False)

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}")
        if self.batch_size is None:
            self.batch_size = DEFAULT_BATCH_SIZES[self.task]
        if self.crop_s is None:
            self.crop_s = DEFAULT_CROPS[self.task]
        if self.batch_size <= 0:
            raise ConfigError(f"{self.task} batch_size must be positive, got {self.batch_size}")
        if not self.crop_s > 0:
            raise ConfigError(f"{self.task} crop_s must be positive, got {self.crop_s}")
        self.manifest, self.root = _resolve_entries(self.manifest, self.root)
        if self.eval_manifest is not None:
            self.eval_manifest, self.eval_root = _resolve_entries(self.eval_manifest, self.eval_root or self.root)
        for entry in list(self.manifest) + list(self.eval_manifest or []):
            if entry.task != self.task:
                raise ManifestError(f"{entry.path} is a {entry.task} entry in a {self.task} manifest")

    @property
    def entries(self):
        if not self.manifest:
            raise EmptyManifestError(f"{self.task} manifest has no entries")
        return self.manifest

    @property
    def eval_entries(self):
        """Evaluation entries, falling back to the training manifest."""
        if self.eval_manifest is None:
            return self.manifest, self.root
        return self.eval_manifest, self.eval_root


def _resolve_entries(manifest, root):
    if isinstance(manifest, (str, os.PathLike)):
        path = os.fspath(manifest)
        return load_manifest(path), root if root is not None else os.path.dirname(os.path.abspath(path))
    return list(manifest), root


@dataclass(frozen=True)
class Schedule:
    """
    Iteration-defined training schedule.

    Attributes:
        iterations_per_epoch (int): Iterations between epoch boundaries
        epochs (int): Number of epochs
        lr (float): Fixed Adam learning rate
        seed (int): Seed for batch sampling, Mix-up and dropout
    """
    iterations_per_epoch: int = ITERATIONS_PER_EPOCH
    epochs: int = EPOCHS
    lr: float = LEARNING_RATE
    seed: int = RANDOM_SEED

    def __post_init__(self):
        if self.iterations_per_epoch <= 0 or self.epochs <= 0:
            raise ConfigError("iterations_per_epoch and epochs must be positive")
        if not self.lr > 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")

    @property
    def total_iterations(self):
        return self.iterations_per_epoch * self.epochs
