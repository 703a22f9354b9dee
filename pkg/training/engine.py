"""
Training engine: joint multi-task training and fine-tuning.
"""
import logging
import math
import os
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pandas as pd
from tqdm import tqdm

from config import TASKS
from errors import ConfigError, IncompatibleCheckpointError, NonFiniteLossError
from features.melspec import FeatureConfig
from models.checkpoint import Checkpoint, restore_model, save_checkpoint
from models.loss import multi_task_loss
from models.mixup import mixup_batch
from nn.optim import Adam
from training.evaluation import evaluate_task
from training.sampler import WaveformStore, sample_crop_batch

logger = logging.getLogger(__name__)

# Metric used to pick best_<TASK>.ckpt and whether higher is better
SELECTION_METRIC = {'ASC': ('accuracy', True), 'TAG': ('lwlrap', True), 'SED': ('er', False)}

DATA_STREAM = 0
MODEL_STREAM = 1


class TrainingEngine:
    """
    The training engine controls joint training of one model on several tasks.

    Every iteration draws one random-crop batch per task, runs a forward and
    backward pass per batch and takes one Adam step on the accumulated
    gradients (or one step per batch in alternating mode). Every
    iterations_per_epoch iterations it validates, checkpoints and logs.

    Batch contents and Mix-up/dropout draws come from generators seeded by
    (seed, iteration, task), so prefetching on threads does not change them.

    Attributes:
        model (BaseModel): Model being trained
        tasks (list): TaskSpec per trained task
        schedule (Schedule): Iteration schedule
        optimizer (Adam): Optimizer over the model parameters
        data (pandas.DataFrame): Per-iteration loss log
    """

    def __init__(self, model, tasks, schedule, optimizer=None, output_dir=None, mixup=False, mixup_alpha=None,
                 alternating=False, loss_weights=None, threads=1, deterministic=True, feature_cfg=None,
                 checkpoint_tasks=None, provenance=None, store=None):
        """
        Initialize the training engine.

        Args:
            model (BaseModel): Model to train
            tasks (iterable): TaskSpec objects, at most one per task
            schedule (Schedule): Iterations, epochs, learning rate and seed
            optimizer (Adam, optional): Existing optimizer (fresh Adam when None)
            output_dir (str, optional): Directory for checkpoints and logs
            mixup (bool): Apply Mix-up to every batch
            mixup_alpha (float, optional): Beta parameter (architecture default when None)
            alternating (bool): One optimizer step per task batch instead of per iteration
            loss_weights (dict, optional): Task -> loss weight
            threads (int): Batch-preparation threads
            deterministic (bool): Prepare batches serially on the calling thread
            feature_cfg (FeatureConfig, optional): Feature parameters
            checkpoint_tasks (iterable, optional): Task set recorded in checkpoints
            provenance (dict, optional): Extra checkpoint metadata
            store (WaveformStore, optional): Shared audio cache
        """
        tasks = list(tasks)
        if not tasks:
            raise ConfigError("training needs at least one task")
        names = [spec.task for spec in tasks]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate tasks in {names}")
        self.model = model
        self.tasks = sorted(tasks, key=lambda spec: TASKS.index(spec.task))
        self.schedule = schedule
        self.optimizer = optimizer or Adam(model.parameters(), lr=schedule.lr)
        self.output_dir = output_dir
        self.mixup = mixup
        self.mixup_alpha = mixup_alpha if mixup_alpha is not None else model.config.mixup_alpha
        self.alternating = alternating
        self.loss_weights = loss_weights
        self.threads = max(1, int(threads))
        self.deterministic = deterministic
        self.feature_cfg = feature_cfg or FeatureConfig()
        self.checkpoint_tasks = tuple(sorted(set(checkpoint_tasks or names) | set(names)))
        self.provenance = {'seed': schedule.seed, 'mixup': bool(mixup), 'alternating': bool(alternating),
                           **(provenance or {})}
        self.store = store if store is not None else WaveformStore()

        self.data = None
        self.epoch = 0
        self.iteration = 0
        self.best = {}
        self.last_checkpoint_path = None
        self.validation = []

    def iteration_rng(self, iteration, task_index, stream):
        seq = np.random.SeedSequence(self.schedule.seed, spawn_key=(iteration, task_index, stream))
        return np.random.default_rng(seq)

    def draw_batches(self, iteration):
        """
        Sample one batch per task for an iteration.

        Returns:
            list: (TaskSpec, inputs, TaskLabels) per task
        """
        batches = []
        for index, spec in enumerate(self.tasks):
            rng = self.iteration_rng(iteration, index, DATA_STREAM)
            x, labels = sample_crop_batch(spec, rng, self.store, self.feature_cfg, self.model.config)
            batches.append((spec, x, labels))
        return batches

    def train_step(self, iteration, batches):
        """
        Run one iteration on prepared batches.

        Returns:
            dict: Log row with per-task losses and the weighted total
        """
        row = {'iter': iteration, 'epoch': self.epoch, 'asc': None, 'tag': None, 'sed': None, 'total': 0.0}
        for index, (spec, x, labels) in enumerate(batches):
            rng = self.iteration_rng(iteration, index, MODEL_STREAM)
            if self.mixup:
                x, labels, _, _ = mixup_batch(x, labels, rng, self.mixup_alpha)
            active = (spec.task,)
            out = self.model.forward(x, active=active, mode='train', rng=rng)
            result = multi_task_loss(out, labels, active, self.loss_weights)
            if not math.isfinite(result.total):
                raise NonFiniteLossError(iteration, self.last_checkpoint_path)
            self.model.backward(result.grads)
            if self.alternating:
                self.optimizer.step()
            row[spec.task.lower()] = result.per_task[spec.task]
            row['total'] += result.total
        if not self.alternating:
            self.optimizer.step()
        return row

    def _batch_stream(self, first, count):
        """Yield prepared batches for iterations first .. first + count - 1."""
        if self.deterministic or self.threads == 1:
            for iteration in range(first, first + count):
                yield self.draw_batches(iteration)
            return
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            pending = deque()
            upcoming = iter(range(first, first + count))
            for iteration in upcoming:
                pending.append(pool.submit(self.draw_batches, iteration))
                if len(pending) >= self.threads:
                    break
            while pending:
                batches = pending.popleft().result()
                nxt = next(upcoming, None)
                if nxt is not None:
                    pending.append(pool.submit(self.draw_batches, nxt))
                yield batches

    def validate(self):
        """Evaluate every task that has an evaluation manifest."""
        reports = {}
        for spec in self.tasks:
            if spec.eval_manifest is not None:
                reports[spec.task] = evaluate_task(self.model, spec, self.store, self.feature_cfg)
        return reports

    def make_checkpoint(self):
        return Checkpoint.from_model(self.model, self.optimizer, self.epoch, self.iteration, self.checkpoint_tasks,
                                     self.provenance)

    def _end_epoch(self, rows):
        ckpt = self.make_checkpoint()
        reports = self.validate()
        for task, report in reports.items():
            self.validation.append({'epoch': self.epoch, 'task': task, 'n_segments': report.n_segments,
                                    **report.metrics})
        self.data = pd.DataFrame(rows)
        if self.output_dir:
            os.makedirs(self.output_dir, exist_ok=True)
            self.last_checkpoint_path = save_checkpoint(ckpt, os.path.join(self.output_dir, 'last.ckpt'))
            for task, report in reports.items():
                metric, higher = SELECTION_METRIC[task]
                value = report.metrics[metric]
                best = self.best.get(task)
                if best is None or (value > best if higher else value < best):
                    self.best[task] = value
                    save_checkpoint(ckpt, os.path.join(self.output_dir, f'best_{task}.ckpt'))
            self.data.to_json(os.path.join(self.output_dir, 'iterations.jsonl'), orient='records', lines=True)
            if self.validation:
                pd.DataFrame(self.validation).to_csv(os.path.join(self.output_dir, 'validation.csv'), index=False)
        return ckpt

    def epochs(self, verbose=False):
        """
        Train epoch by epoch.

        Yields:
            Checkpoint: State at the end of every epoch
        """
        sched = self.schedule
        rows = []
        iterator = self._batch_stream(0, sched.total_iterations)
        progress = tqdm(total=sched.total_iterations, disable=not verbose, desc='training')
        try:
            for epoch in range(sched.epochs):
                self.epoch = epoch
                for _ in range(sched.iterations_per_epoch):
                    row = self.train_step(self.iteration, next(iterator))
                    rows.append(row)
                    self.iteration += 1
                    progress.update(1)
                    progress.set_postfix(loss=f"{row['total']:.4f}")
                self.epoch = epoch + 1
                ckpt = self._end_epoch(rows)
                logger.info("Epoch %d/%d done, mean loss %.4f", self.epoch, sched.epochs,
                            self.data['total'].iloc[-sched.iterations_per_epoch:].mean())
                yield ckpt
        finally:
            progress.close()
            iterator.close()

    def run(self, verbose=True):
        """
        Run the whole schedule.

        Args:
            verbose (bool): Whether to display a progress bar and summaries

        Returns:
            pandas.DataFrame: Per-iteration loss log
        """
        start_time = time.time()
        if verbose:
            print("\n=== TRAINING SETUP ===")
            print(f"Model: DcaseNet-{self.model.variant} ({self.model.parameter_count()} parameters)")
            print(f"Tasks: {', '.join(f'{s.task} (batch {s.batch_size}, crop {s.crop_s:g} s)' for s in self.tasks)}")
            print(f"Schedule: {self.schedule.epochs} epochs x {self.schedule.iterations_per_epoch} iterations, "
                  f"lr {self.schedule.lr:g}")
            print(f"Mix-up: {'alpha ' + format(self.mixup_alpha, 'g') if self.mixup else 'off'}")
            print("======================\n")

        for _ in self.epochs(verbose):
            pass

        if verbose:
            elapsed_time = time.time() - start_time
            print("\n=== FINAL STATE ===")
            print(f"Training completed in {elapsed_time:.2f} seconds")
            print(f"Iterations: {self.iteration}")
            for column, stats in self.get_loss_statistics().items():
                print(f"Loss {column}: {stats['first']:.4f} -> {stats['last']:.4f} (min {stats['min']:.4f})")
            for task, value in sorted(self.best.items()):
                print(f"Best {task} {SELECTION_METRIC[task][0]}: {value:.4f}")
            if self.last_checkpoint_path:
                print(f"Last checkpoint: {self.last_checkpoint_path}")
            print("===================")
        return self.data

    def get_loss_statistics(self):
        """
        Summarize the loss log per task.

        Returns:
            dict: Task -> {'first', 'last', 'mean', 'min'}, or None before training
        """
        if self.data is None:
            return None
        stats = {}
        for column in ('asc', 'tag', 'sed', 'total'):
            series = self.data[column].dropna() if column in self.data else pd.Series(dtype=float)
            if series.empty:
                continue
            stats[column] = {'first': float(series.iloc[0]), 'last': float(series.iloc[-1]),
                             'mean': float(series.mean()), 'min': float(series.min())}
        return stats


def joint_train(model, tasks, sched, **kwargs):
    """
    Train a model jointly on a set of tasks (a single task gives a baseline).

    Args:
        model (BaseModel): Model to train
        tasks (iterable): TaskSpec objects
        sched (Schedule): Training schedule
        **kwargs: TrainingEngine options

    Yields:
        Checkpoint: One per epoch
    """
    yield from TrainingEngine(model, tasks, sched, **kwargs).epochs()


def fine_tune_engine(ckpt, target, sched, **kwargs):
    """
    Engine that fine-tunes a checkpoint on one task with a fresh Adam state.

    The heads of the other tasks are frozen and left out of the optimizer.
    The shared trunk stays trainable.
    """
    if target.task not in ckpt.tasks:
        raise IncompatibleCheckpointError(
            f"checkpoint was trained on {list(ckpt.tasks)}, cannot fine-tune on {target.task}")
    model = restore_model(ckpt)
    model.freeze_heads((target.task,))
    provenance = {'fine_tune': target.task, 'parent_config_hash': ckpt.config.config_hash(),
                  'parent_epoch': ckpt.epoch, 'parent_tasks': list(ckpt.tasks), **kwargs.pop('provenance', {})}
    return TrainingEngine(model, [target], sched, checkpoint_tasks=(target.task,), provenance=provenance, **kwargs)


def fine_tune(ckpt, target, sched, **kwargs):
    """
    Fine-tune a jointly trained checkpoint on one task.

    Yields:
        Checkpoint: One per epoch
    """
    yield from fine_tune_engine(ckpt, target, sched, **kwargs).epochs()
