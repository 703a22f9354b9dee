"""
Tests for batch sampling, the training engine, fine-tuning and evaluation.
"""
import json
import math
from collections import Counter
from dataclasses import replace

import numpy as np
import pytest

from audio.manifest import ManifestEntry, load_manifest, resolve_path
from errors import ConfigError, EmptyManifestError, IncompatibleCheckpointError, ManifestError, NonFiniteLossError
from features.melspec import FeatureConfig, log_mel_spectrogram
from models import build_model, tiny_config
from models.checkpoint import Checkpoint, load_checkpoint
from models.labels import events_to_roll
from models.loss import LossResult
from nn.optim import Adam
from training import Schedule, TaskSpec, TrainingEngine, evaluate_task, fine_tune, fine_tune_engine, joint_train
from training.sampler import WaveformStore, sample_crop_batch

SMALL_CROPS = {'ASC': 0.5, 'TAG': 0.5, 'SED': 1.0}


def toy_specs(corpus, tasks=('ASC', 'TAG', 'SED'), batch_size=2):
    return [TaskSpec(task, corpus['train'][task], batch_size=batch_size, crop_s=SMALL_CROPS[task],
                     eval_manifest=corpus['eval'][task]) for task in tasks]


def dummy_entries(task):
    labels = {'ASC': {'scene_id': 1}, 'TAG': {'tags': [3]}, 'SED': {'events': [(0.0, 1.0, 2)]}}[task]
    return [ManifestEntry(f'{task.lower()}.wav', task, **labels)]


def warm_model(variant='v3', seed=0):
    model = build_model(tiny_config(variant), seed=seed)
    model.forward(np.random.default_rng(seed).standard_normal((2, 32, 128)), mode='train')
    return model


class TestSpecs:

    def test_default_geometry(self):
        sizes = {task: TaskSpec(task, dummy_entries(task)).batch_size for task in ('ASC', 'TAG', 'SED')}
        assert sizes == {'ASC': 32, 'TAG': 24, 'SED': 32}
        assert TaskSpec('SED', dummy_entries('SED')).crop_s == 30.0

    def test_schedule_total(self):
        assert Schedule(iterations_per_epoch=500, epochs=2).total_iterations == 1000
        with pytest.raises(ConfigError):
            Schedule(epochs=0)
        with pytest.raises(ConfigError):
            Schedule(lr=0.0)

    def test_entries_must_match_task(self):
        with pytest.raises(ManifestError):
            TaskSpec('TAG', dummy_entries('ASC'))

    def test_empty_manifest(self):
        with pytest.raises(EmptyManifestError):
            TaskSpec('ASC', []).entries

    def test_manifest_path_sets_root(self, toy_corpus):
        spec = TaskSpec('ASC', toy_corpus['train']['ASC'])
        assert len(spec.entries) == 6
        assert spec.root.endswith('train')
        assert spec.eval_entries == (spec.manifest, spec.root)


class TestScheduleDriving:

    def test_one_batch_per_task_per_iteration(self, monkeypatch):
        drawn = []
        iterations = []

        def fake_sample(spec, rng, store=None, feature_cfg=None, arch=None):
            drawn.append((spec.task, spec.batch_size))
            return None, None

        def fake_step(self, iteration, batches):
            iterations.append(iteration)
            return {'iter': iteration, 'epoch': self.epoch, 'asc': 1.0, 'tag': 1.0, 'sed': 1.0, 'total': 3.0}

        monkeypatch.setattr('training.engine.sample_crop_batch', fake_sample)
        monkeypatch.setattr(TrainingEngine, 'train_step', fake_step)
        tasks = [TaskSpec(task, dummy_entries(task)) for task in ('SED', 'ASC', 'TAG')]
        engine = TrainingEngine(build_model(tiny_config('v2')), tasks, Schedule(iterations_per_epoch=500, epochs=2))
        checkpoints = list(engine.epochs())

        assert len(checkpoints) == 2
        assert [c.iteration for c in checkpoints] == [500, 1000]
        assert iterations == list(range(1000))
        assert Counter(drawn) == {('ASC', 32): 1000, ('TAG', 24): 1000, ('SED', 32): 1000}
        assert drawn[:3] == [('ASC', 32), ('TAG', 24), ('SED', 32)]
        assert len(engine.data) == 1000
        assert list(engine.data['epoch'].unique()) == [0, 1]

    def test_duplicate_tasks_rejected(self):
        tasks = [TaskSpec('ASC', dummy_entries('ASC')), TaskSpec('ASC', dummy_entries('ASC'))]
        with pytest.raises(ConfigError):
            TrainingEngine(build_model(tiny_config('v1')), tasks, Schedule())


class TestSampling:

    def test_batch_shapes(self, toy_corpus, rng):
        spec = TaskSpec('ASC', toy_corpus['train']['ASC'], batch_size=3, crop_s=0.5)
        x, labels = sample_crop_batch(spec, rng, arch=tiny_config())
        assert x.shape == (3, 24, 128)
        assert x.dtype == np.float32
        assert labels.scene.shape == (3, 10)
        assert labels.present_tasks() == ('ASC',)

    def test_fixed_seed_fixed_batch(self, toy_corpus):
        spec = TaskSpec('TAG', toy_corpus['train']['TAG'], batch_size=4, crop_s=0.5)
        store = WaveformStore()
        x1, y1 = sample_crop_batch(spec, np.random.default_rng(11), store)
        x2, y2 = sample_crop_batch(spec, np.random.default_rng(11), store)
        np.testing.assert_array_equal(x1, x2)
        np.testing.assert_array_equal(y1.tags, y2.tags)

    def test_full_length_sed_crop_keeps_events(self, toy_corpus):
        spec = TaskSpec('SED', toy_corpus['train']['SED'], batch_size=3, crop_s=3.0)
        arch = tiny_config()
        x, labels = sample_crop_batch(spec, np.random.default_rng(4), arch=arch)
        picks = np.random.default_rng(4).integers(0, len(spec.entries), size=3)
        n_pooled = arch.pooled_frames(x.shape[1])
        assert labels.events.shape == (3, n_pooled, 14)
        for roll, pick in zip(labels.events, picks):
            expected = events_to_roll(spec.entries[pick].events, n_pooled, arch.pooled_hop_s)
            np.testing.assert_array_equal(roll, expected)

    def test_short_sed_crop_labels_stay_in_range(self, toy_corpus, rng):
        spec = TaskSpec('SED', toy_corpus['train']['SED'], batch_size=4, crop_s=1.0)
        _, labels = sample_crop_batch(spec, rng, arch=tiny_config())
        assert labels.events.shape == (4, 12, 14)
        assert labels.events[..., 2:].sum() == 0

    def test_store_caches_segments(self, toy_corpus, rng):
        spec = TaskSpec('ASC', toy_corpus['train']['ASC'], batch_size=8, crop_s=0.5)
        store = WaveformStore()
        sample_crop_batch(spec, rng, store)
        assert 1 <= len(store) <= 6

    def test_store_evicts_least_recently_used(self, toy_corpus):
        spec = TaskSpec('ASC', toy_corpus['train']['ASC'])
        first, second, third = spec.entries[:3]
        paths = [resolve_path(e, spec.root) for e in (first, second, third)]
        sizes = [WaveformStore().get(e, spec.root).samples.nbytes for e in (first, second, third)]
        store = WaveformStore(max_bytes=sizes[0] + max(sizes[1], sizes[2]))
        for entry in (first, second, first, third):
            store.get(entry, spec.root)
        assert paths[0] in store and paths[2] in store
        assert paths[1] not in store
        assert store.nbytes == sizes[0] + sizes[2]

    def test_event_past_segment_end_is_rejected(self, toy_corpus, rng):
        spec = TaskSpec('SED', toy_corpus['train']['SED'])
        overlong = replace(spec.entries[0], events=((1.0, 10.0, 0),))
        bad = TaskSpec('SED', [overlong], batch_size=1, crop_s=1.0, root=spec.root)
        with pytest.raises(ManifestError, match='exceeds duration'):
            sample_crop_batch(bad, rng)
        engine = TrainingEngine(build_model(tiny_config('v2'), seed=0), [bad],
                                Schedule(iterations_per_epoch=1, epochs=1))
        with pytest.raises(ManifestError):
            engine.run(verbose=False)


class TestJointTraining:

    def train_bytes(self, corpus, **kwargs):
        model = build_model(tiny_config('v3'), seed=0)
        sched = Schedule(iterations_per_epoch=2, epochs=1, lr=1e-3, seed=5)
        checkpoints = list(joint_train(model, toy_specs(corpus), sched, mixup=True, **kwargs))
        return checkpoints[-1].to_bytes()

    def test_fixed_seed_fixed_checkpoint(self, toy_corpus):
        assert self.train_bytes(toy_corpus) == self.train_bytes(toy_corpus)

    def test_prefetch_threads_do_not_change_results(self, toy_corpus):
        serial = self.train_bytes(toy_corpus)
        threaded = self.train_bytes(toy_corpus, threads=3, deterministic=False)
        assert serial == threaded

    def test_epoch_outputs(self, toy_corpus, tmp_path):
        out = tmp_path / 'run'
        engine = TrainingEngine(build_model(tiny_config('v2'), seed=0), toy_specs(toy_corpus),
                                Schedule(iterations_per_epoch=2, epochs=2, seed=1), output_dir=str(out))
        data = engine.run(verbose=False)

        assert list(data.columns) == ['iter', 'epoch', 'asc', 'tag', 'sed', 'total']
        assert len(data) == 4
        np.testing.assert_allclose(data['total'], data[['asc', 'tag', 'sed']].sum(axis=1))
        for name in ('last.ckpt', 'best_ASC.ckpt', 'best_TAG.ckpt', 'best_SED.ckpt', 'iterations.jsonl',
                     'validation.csv'):
            assert (out / name).exists()
        lines = (out / 'iterations.jsonl').read_text().splitlines()
        assert [json.loads(line)['iter'] for line in lines] == [0, 1, 2, 3]

        last = load_checkpoint(out / 'last.ckpt')
        assert (last.epoch, last.iteration, last.tasks) == (2, 4, ('ASC', 'SED', 'TAG'))
        assert set(last.adam) == {p.name for p in engine.model.parameters()}
        assert last.provenance['seed'] == 1
        assert len(engine.validation) == 6
        assert set(engine.best) == {'ASC', 'TAG', 'SED'}

    def test_best_sed_checkpoint_has_lowest_error_rate(self, toy_corpus, tmp_path):
        out = tmp_path / 'run'
        engine = TrainingEngine(build_model(tiny_config('v2'), seed=0), toy_specs(toy_corpus, tasks=('SED',)),
                                Schedule(iterations_per_epoch=1, epochs=3, lr=1e-2, seed=4), output_dir=str(out))
        engine.run(verbose=False)
        rows = [row for row in engine.validation if row['task'] == 'SED']
        assert len(rows) == 3
        lowest = min(row['er'] for row in rows)
        assert engine.best['SED'] == lowest
        best_epoch = next(row['epoch'] for row in rows if row['er'] == lowest)
        assert load_checkpoint(out / 'best_SED.ckpt').epoch == best_epoch

    def test_run_summary_lists_loss_statistics(self, toy_corpus, capsys):
        engine = TrainingEngine(build_model(tiny_config('v1'), seed=0), toy_specs(toy_corpus, tasks=('ASC', 'SED')),
                                Schedule(iterations_per_epoch=2, epochs=1, seed=3))
        engine.run(verbose=True)
        stats = engine.get_loss_statistics()
        assert set(stats) == {'asc', 'sed', 'total'}
        assert stats['total']['min'] <= stats['total']['mean']
        out = capsys.readouterr().out
        assert f"Loss asc: {stats['asc']['first']:.4f} -> {stats['asc']['last']:.4f}" in out

    def test_alternating_steps_once_per_task(self, toy_corpus):
        model = build_model(tiny_config('v1'), seed=0)
        engine = TrainingEngine(model, toy_specs(toy_corpus, tasks=('ASC', 'TAG')),
                                Schedule(iterations_per_epoch=3, epochs=1), alternating=True)
        list(engine.epochs())
        assert {state.t for state in engine.optimizer.states.values()} == {6}

    def test_non_finite_loss_stops_training(self, toy_corpus, monkeypatch):
        def nan_loss(out, y, active, weights=None):
            return LossResult(total=math.nan, per_task={task: math.nan for task in active})

        monkeypatch.setattr('training.engine.multi_task_loss', nan_loss)
        engine = TrainingEngine(build_model(tiny_config('v3')), toy_specs(toy_corpus, tasks=('ASC',)),
                                Schedule(iterations_per_epoch=2, epochs=1))
        with pytest.raises(NonFiniteLossError) as excinfo:
            list(engine.epochs())
        assert excinfo.value.iteration == 0


class TestFineTune:

    @pytest.fixture
    def joint_checkpoint(self, toy_corpus):
        model = build_model(tiny_config('v3'), seed=0)
        sched = Schedule(iterations_per_epoch=2, epochs=1, seed=2)
        return list(joint_train(model, toy_specs(toy_corpus), sched))[-1]

    def test_starts_from_checkpoint_weights(self, joint_checkpoint, toy_corpus):
        target = toy_specs(toy_corpus, tasks=('ASC',))[0]
        engine = fine_tune_engine(joint_checkpoint, target, Schedule(iterations_per_epoch=1, epochs=1))
        for name, param in engine.model.named_parameters():
            np.testing.assert_array_equal(param.value, joint_checkpoint.params[name])
        assert all(state.t == 0 for state in engine.optimizer.states.values())
        assert engine.provenance['fine_tune'] == 'ASC'

    def test_other_heads_stay_frozen(self, joint_checkpoint, toy_corpus):
        target = toy_specs(toy_corpus, tasks=('ASC',))[0]
        ckpt = list(fine_tune(joint_checkpoint, target, Schedule(iterations_per_epoch=2, epochs=1)))[-1]
        assert ckpt.tasks == ('ASC',)
        for name in ('tag_fc.weight', 'sed_fc.weight', 'gru.fwd.w_hh', 'sed_branch.linear.weight'):
            np.testing.assert_array_equal(ckpt.params[name], joint_checkpoint.params[name])
        assert not np.array_equal(ckpt.params['asc_fc.weight'], joint_checkpoint.params['asc_fc.weight'])

    def test_other_heads_left_out_of_optimizer(self, joint_checkpoint, toy_corpus):
        target = toy_specs(toy_corpus, tasks=('SED',))[0]
        engine = fine_tune_engine(joint_checkpoint, target, Schedule(iterations_per_epoch=1, epochs=1))
        params = dict(engine.model.named_parameters())
        for prefix in ('asc_dense.', 'asc_fc.', 'tag_branch.', 'tag_dense.', 'tag_fc.'):
            names = [name for name in params if name.startswith(prefix)]
            assert names
            for name in names:
                assert not params[name].trainable
                assert name not in engine.optimizer.states
        for name in ('sed_fc.weight', 'sed_dense.linear1.weight', 'sed_branch.linear.weight',
                     'asc_branch.conv1.weight', 'gru.fwd.w_hh', 'conv.block1.conv1.weight'):
            assert params[name].trainable
            assert name in engine.optimizer.states

    def test_freeze_heads_spares_shared_layers(self, variant):
        model = build_model(tiny_config(variant), seed=0)
        frozen = set(model.freeze_heads(['SED']))
        assert {'asc_fc.weight', 'tag_fc.weight'} <= frozen
        assert not any(name.startswith(('sed_', 'gru.', 'conv.')) for name in frozen)
        trainable = {name for name, param in model.named_parameters() if param.trainable}
        assert trainable.isdisjoint(frozen)
        assert {p.name for p in Adam(model.parameters()).params} == trainable

    def test_task_outside_checkpoint(self, toy_corpus):
        ckpt = Checkpoint.from_model(build_model(tiny_config('v2')), tasks=['ASC'])
        target = toy_specs(toy_corpus, tasks=('SED',))[0]
        with pytest.raises(IncompatibleCheckpointError):
            fine_tune_engine(ckpt, target, Schedule())


class TestEvaluate:

    @pytest.mark.parametrize('task, keys', [('ASC', {'accuracy'}), ('TAG', {'lwlrap'}), ('SED', {'f1', 'er'})])
    def test_report_metrics(self, toy_corpus, task, keys):
        spec = toy_specs(toy_corpus, tasks=(task,))[0]
        model = warm_model()
        report = evaluate_task(model, spec)
        assert set(report.metrics) == keys
        assert report.n_segments == len(load_manifest(toy_corpus['eval'][task]))
        assert evaluate_task(model, spec).metrics == report.metrics

    def test_whole_segments_are_scored(self, toy_corpus):
        spec = toy_specs(toy_corpus, tasks=('ASC',))[0]
        model = warm_model('v1')
        predictions = []
        evaluate_task(model, spec, predictions=predictions)
        entries, root = spec.eval_entries
        store = WaveformStore()
        for entry, record in zip(entries, predictions):
            features = log_mel_spectrogram(store.get(entry, root), FeatureConfig()).values
            assert features.shape[0] == 49
            expected = model.forward(features[None], active=['ASC']).asc_logits[0]
            np.testing.assert_allclose(record['scores'], expected, rtol=1e-6)

    def test_sed_rolls_cover_the_segment(self, toy_corpus):
        spec = toy_specs(toy_corpus, tasks=('SED',))[0]
        predictions = []
        evaluate_task(warm_model('v2'), spec, predictions=predictions)
        assert len(predictions) == 2
        for record in predictions:
            assert np.shape(record['roll']) == (37, 14)
            assert record['frame_hop_s'] == pytest.approx(0.08)


@pytest.mark.slow
def test_toy_run_learns_scenes(default_toy_corpus, tmp_path):
    specs = [TaskSpec('ASC', default_toy_corpus['train']['ASC'], batch_size=8, crop_s=2.0,
                      eval_manifest=default_toy_corpus['eval']['ASC'])]
    engine = TrainingEngine(build_model(tiny_config('v3'), seed=0), specs,
                            Schedule(iterations_per_epoch=50, epochs=3, lr=3e-3, seed=0),
                            output_dir=str(tmp_path / 'run'))
    data = engine.run(verbose=False)
    assert data['asc'].iloc[-10:].mean() < data['asc'].iloc[:10].mean()
    assert engine.best['ASC'] >= 0.75


@pytest.mark.slow
def test_joint_toy_run_then_fine_tune(default_toy_corpus, tmp_path):
    geometry = {'ASC': (8, 2.0), 'TAG': (8, 2.0), 'SED': (4, 6.0)}
    specs = [TaskSpec(task, default_toy_corpus['train'][task], batch_size=batch_size, crop_s=crop_s,
                      eval_manifest=default_toy_corpus['eval'][task])
             for task, (batch_size, crop_s) in geometry.items()]
    joint = TrainingEngine(build_model(tiny_config('v3'), seed=0), specs,
                           Schedule(iterations_per_epoch=50, epochs=3, lr=3e-3, seed=0),
                           output_dir=str(tmp_path / 'joint'))
    joint.run(verbose=False)
    final = {row['task']: row for row in joint.validation if row['epoch'] == 3}
    assert final['TAG']['lwlrap'] >= 0.6
    assert final['SED']['er'] < 1.0

    tuner = fine_tune_engine(load_checkpoint(tmp_path / 'joint' / 'last.ckpt'), specs[0],
                             Schedule(iterations_per_epoch=25, epochs=2, lr=1e-3, seed=1),
                             output_dir=str(tmp_path / 'asc'))
    tuner.run(verbose=False)
    assert tuner.best['ASC'] >= final['ASC']['accuracy'] - 0.02
