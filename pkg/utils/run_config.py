"""
Run configuration files and command-line overrides.
"""
import json
import logging
import os
from dataclasses import dataclass, field, replace
from typing import Optional

from config import LOSS_WEIGHTS, TASKS, VARIANTS
from errors import ConfigError, DcaseNetError
from features.melspec import FeatureConfig
from models.architecture import ArchitectureConfig, tiny_config
from training.specs import Schedule, TaskSpec

logger = logging.getLogger(__name__)

PRESETS = {'tiny': tiny_config}
TOP_LEVEL_KEYS = {'variant', 'architecture', 'features', 'tasks', 'schedule', 'mixup', 'deterministic', 'threads',
                  'alternating', 'loss_weights', 'output_dir'}
TASK_KEYS = {'manifest', 'eval_manifest', 'batch_size', 'crop_s'}


@dataclass
class RunConfig:
    """
    Everything a training, evaluation or gradient-check run needs.

    Attributes:
        architecture (ArchitectureConfig): Model structure (variant included)
        features (FeatureConfig): Feature parameters
        tasks (dict): Task -> {'manifest', 'eval_manifest', 'batch_size', 'crop_s'}
        schedule (Schedule): Iterations, epochs, learning rate, seed
        mixup (bool): Mix-up on or off
        mixup_alpha (float): Mix-up Beta parameter
        deterministic (bool): Serialize batch preparation
        threads (int): Batch-preparation threads
        alternating (bool): One optimizer step per task batch
        loss_weights (dict): Task -> loss weight
        output_dir (str): Run directory
        base_dir (str): Directory relative paths resolve against
    """
    architecture: ArchitectureConfig = field(default_factory=ArchitectureConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    tasks: dict = field(default_factory=dict)
    schedule: Schedule = field(default_factory=Schedule)
    mixup: bool = False
    mixup_alpha: Optional[float] = None
    deterministic: bool = True
    threads: int = 1
    alternating: bool = False
    loss_weights: dict = field(default_factory=lambda: dict(LOSS_WEIGHTS))
    output_dir: str = 'runs/default'
    base_dir: str = '.'

    def __post_init__(self):
        if self.architecture.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}")
        for task, options in self.tasks.items():
            if task not in TASKS:
                raise ConfigError(f"unknown task {task!r} in run config")
            unknown = set(options) - TASK_KEYS
            if unknown:
                raise ConfigError(f"unknown {task} options: {sorted(unknown)}")
            if 'manifest' not in options:
                raise ConfigError(f"{task} needs a manifest")
        unknown = set(self.loss_weights) - set(TASKS)
        if unknown:
            raise ConfigError(f"loss weights for unknown tasks: {sorted(unknown)}")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        if self.mixup_alpha is None:
            self.mixup_alpha = self.architecture.mixup_alpha
        if not self.mixup_alpha > 0:
            raise ConfigError("mixup alpha must be positive")

    @classmethod
    def from_dict(cls, d, base_dir='.'):
        unknown = set(d) - TOP_LEVEL_KEYS
        if unknown:
            raise ConfigError(f"unknown run config keys: {sorted(unknown)}")
        try:
            arch_fields = dict(d.get('architecture', {}))
            preset = arch_fields.pop('preset', None)
            if 'variant' in d:
                arch_fields['variant'] = d['variant']
            if preset is not None:
                if preset not in PRESETS:
                    raise ConfigError(f"unknown architecture preset {preset!r}")
                architecture = PRESETS[preset](**arch_fields)
            else:
                architecture = ArchitectureConfig(**arch_fields)
            features = FeatureConfig(**d.get('features', {}))
            schedule = Schedule(**d.get('schedule', {}))
        except TypeError as exc:
            raise ConfigError(f"invalid run config: {exc}") from exc
        except DcaseNetError as exc:
            raise ConfigError(str(exc)) from exc
        mixup = d.get('mixup', {})
        return cls(
            architecture=architecture,
            features=features,
            tasks={task: dict(options) for task, options in d.get('tasks', {}).items()},
            schedule=schedule,
            mixup=bool(mixup.get('enabled', False)),
            mixup_alpha=mixup.get('alpha'),
            deterministic=bool(d.get('deterministic', True)),
            threads=int(d.get('threads', 1)),
            alternating=bool(d.get('alternating', False)),
            loss_weights={**LOSS_WEIGHTS, **d.get('loss_weights', {})},
            output_dir=d.get('output_dir', 'runs/default'),
            base_dir=base_dir,
        )

    def to_dict(self):
        arch = self.architecture.to_dict()
        return {
            'variant': arch.pop('variant'),
            'architecture': arch,
            'features': {k: getattr(self.features, k) for k in self.features.__dataclass_fields__},
            'tasks': self.tasks,
            'schedule': {k: getattr(self.schedule, k) for k in self.schedule.__dataclass_fields__},
            'mixup': {'enabled': self.mixup, 'alpha': self.mixup_alpha},
            'deterministic': self.deterministic,
            'threads': self.threads,
            'alternating': self.alternating,
            'loss_weights': self.loss_weights,
            'output_dir': self.output_dir,
        }

    def resolve(self, path):
        if path is None or os.path.isabs(path):
            return path
        return os.path.normpath(os.path.join(self.base_dir, path))

    def check_paths(self, tasks=None):
        """Raise ConfigError for any referenced manifest that does not exist."""
        for task in tasks or self.tasks:
            options = self.tasks.get(task)
            if options is None:
                raise ConfigError(f"run config has no {task} task")
            for key in ('manifest', 'eval_manifest'):
                path = self.resolve(options.get(key))
                if path is not None and not os.path.isfile(path):
                    raise ConfigError(f"{task} {key} not found: {path}")

    def task_specs(self, tasks=None):
        """TaskSpec objects for the selected (default: all configured) tasks."""
        selected = [t for t in TASKS if t in (tasks or self.tasks)]
        self.check_paths(selected)
        specs = []
        for task in selected:
            options = self.tasks[task]
            specs.append(TaskSpec(task, self.resolve(options['manifest']), options.get('batch_size'),
                                  options.get('crop_s'), self.resolve(options.get('eval_manifest'))))
        return specs

    def output_path(self, *parts):
        return os.path.join(self.resolve(self.output_dir), *parts)


def load_run_config(path):
    """
    Load a JSON run config; relative paths resolve against its directory.
    """
    if not os.path.isfile(path):
        raise ConfigError(f"no such run config: {path}")
    with open(path, 'r', encoding='utf-8') as f:
        try:
            d = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    base_dir = os.path.dirname(os.path.abspath(path))
    logger.debug("Loaded run config %s", path)
    return RunConfig.from_dict(d, base_dir)


def apply_overrides(cfg, args):
    """
    Apply command-line flags on top of a run config.

    Args:
        cfg (RunConfig): Config from file (or defaults)
        args (argparse.Namespace): Parsed flags; None means "not given"

    Returns:
        RunConfig: New config with the overrides applied
    """
    arch = cfg.architecture
    if getattr(args, 'variant', None) is not None:
        try:
            arch = arch.with_variant(args.variant)
        except DcaseNetError as exc:
            raise ConfigError(str(exc)) from exc

    schedule_changes = {}
    for flag, key in (('epochs', 'epochs'), ('iterations_per_epoch', 'iterations_per_epoch'), ('lr', 'lr'),
                      ('seed', 'seed')):
        value = getattr(args, flag, None)
        if value is not None:
            schedule_changes[key] = value
    schedule = replace(cfg.schedule, **schedule_changes) if schedule_changes else cfg.schedule

    changes = {'architecture': arch, 'schedule': schedule}
    for flag in ('mixup', 'mixup_alpha', 'deterministic', 'threads', 'alternating', 'output_dir'):
        value = getattr(args, flag, None)
        if value is not None:
            changes[flag] = value
    tasks = getattr(args, 'tasks', None)
    if tasks is not None:
        missing = set(tasks) - set(cfg.tasks)
        if missing:
            raise ConfigError(f"tasks {sorted(missing)} are not configured")
        changes['tasks'] = {t: cfg.tasks[t] for t in tasks}
    return replace(cfg, **changes)
