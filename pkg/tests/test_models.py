"""
Tests for the DcaseNet variants, losses, Mix-up, label rolls and checkpoints.
"""
import numpy as np
import pytest

from errors import (CheckpointError, DcaseNetError, IncompatibleCheckpointError, InvalidArchitectureError,
                    InvalidArgumentError, MissingLabelsError, MixupBatchError, ShapeMismatchError, TooFewFramesError)
from models import (ArchitectureConfig, TaskLabels, build_model, events_to_roll, mixup_batch, multi_task_loss,
                    roll_to_events, tiny_config)
from models.base_model import ModelOutputs
from models.checkpoint import Checkpoint, load_checkpoint, load_model_state, restore_model, save_checkpoint
from models.gradients import check_model_gradients
from models.labels import scene_one_hot, tags_multi_hot
from models.loss import binary_cross_entropy, categorical_cross_entropy
from nn.base_layer import Parameter
from nn.gradcheck import finite_difference_check


def warmed_up(model, rng, n_frames=32):
    """Run one train-mode pass so batch-norm running statistics exist."""
    model.forward(rng.standard_normal((4, n_frames, model.config.n_mels)), mode='train')
    return model


@pytest.fixture
def model(variant, rng):
    return warmed_up(build_model(tiny_config(variant), seed=3), rng)


class TestArchitecture:

    def test_pooled_frames(self):
        cfg = ArchitectureConfig()
        assert cfg.pooled_frames(499) == 124
        assert cfg.pooled_hop_s == pytest.approx(0.08)
        assert cfg.pooled_bands() == 8

    def test_default_trunk_ends_at_512_channels(self):
        assert build_model(ArchitectureConfig(variant='v2')).final_conv_channels == 512

    def test_v3_has_more_parameters_than_v2(self):
        v2 = build_model(ArchitectureConfig(variant='v2'))
        v3 = build_model(ArchitectureConfig(variant='v3'))
        assert v3.parameter_count() > v2.parameter_count()

    def test_invalid_configs(self):
        with pytest.raises(InvalidArchitectureError):
            ArchitectureConfig(variant='v4')
        with pytest.raises(InvalidArchitectureError):
            ArchitectureConfig(channels=(8, 8, 8))
        with pytest.raises(InvalidArchitectureError):
            ArchitectureConfig(num_scenes=15)
        with pytest.raises(InvalidArchitectureError):
            ArchitectureConfig.from_dict({'variant': 'v1', 'layers': 3})

    def test_dict_round_trip_keeps_hash(self):
        cfg = tiny_config('v1')
        assert ArchitectureConfig.from_dict(cfg.to_dict()) == cfg
        assert ArchitectureConfig.from_dict(cfg.to_dict()).config_hash() == cfg.config_hash()
        assert cfg.with_variant('v2').config_hash() != cfg.config_hash()


class TestForward:

    def test_output_shapes(self, model, rng):
        out = model.forward(rng.standard_normal((2, 499, 128)))
        assert out.asc_logits.shape == (2, 10)
        assert out.tag_probs.shape == (2, 80)
        assert out.sed_roll.shape == (2, 124, 14)
        assert np.all((out.sed_roll > 0) & (out.sed_roll < 1))
        np.testing.assert_allclose(out.asc_probs.sum(axis=1), 1.0, rtol=1e-5)

    def test_inactive_heads_are_skipped(self, model, rng):
        out = model.forward(rng.standard_normal((2, 32, 128)), active=['SED'])
        assert out.asc_logits is None
        assert out.tag_logits is None
        assert out.sed_logits.shape == (2, 8, 14)

    def test_asc_logits_do_not_depend_on_active_set(self, model, rng):
        x = rng.standard_normal((3, 40, 128))
        alone = model.forward(x, active=['ASC']).asc_logits
        joint = model.forward(x).asc_logits
        np.testing.assert_array_equal(alone, joint)

    def test_eval_mode_is_permutation_equivariant(self, model, rng):
        x = rng.standard_normal((4, 24, 128))
        perm = np.array([2, 0, 3, 1])
        out = model.forward(x)
        permuted = model.forward(x[perm])
        np.testing.assert_allclose(permuted.asc_logits, out.asc_logits[perm], rtol=1e-5, atol=1e-6)
        np.testing.assert_allclose(permuted.sed_logits, out.sed_logits[perm], rtol=1e-5, atol=1e-6)

    def test_single_spectrogram_is_batched(self, model, rng):
        x = rng.standard_normal((24, 128))
        np.testing.assert_array_equal(model.forward(x).tag_logits, model.forward(x[None]).tag_logits)

    def test_too_few_frames(self, model, rng):
        with pytest.raises(TooFewFramesError):
            model.forward(rng.standard_normal((1, 15, 128)))

    def test_wrong_band_count(self, model, rng):
        with pytest.raises(ShapeMismatchError):
            model.forward(rng.standard_normal((1, 32, 64)))

    @pytest.mark.parametrize('active', [[], ['SCENE']])
    def test_invalid_active_tasks_are_pipeline_errors(self, model, rng, active):
        with pytest.raises(DcaseNetError) as excinfo:
            model.forward(rng.standard_normal((1, 32, 128)), active=active)
        assert isinstance(excinfo.value, InvalidArgumentError)

    def test_backward_needs_an_active_task(self, model, rng):
        model.forward(rng.standard_normal((2, 32, 128)), active=['ASC'])
        with pytest.raises(InvalidArgumentError):
            model.backward({'TAG': np.zeros((2, 80), dtype=np.float32)})


class TestLoss:

    def test_uniform_logits_give_log_ten(self):
        loss, _ = categorical_cross_entropy(np.zeros((4, 10)), scene_one_hot([0, 3, 5, 9]))
        assert loss == pytest.approx(np.log(10))

    def test_clamped_bce_stays_finite(self):
        loss, grad = binary_cross_entropy(np.full((1, 80), 50.0), np.ones((1, 80)))
        assert 0 <= loss <= 1e-6
        np.testing.assert_array_equal(grad, 0.0)
        loss, _ = binary_cross_entropy(np.full((1, 80), -50.0), np.ones((1, 80)))
        assert loss == pytest.approx(-np.log(1e-7))

    @pytest.mark.parametrize('kind', ['categorical', 'binary'])
    def test_loss_gradients(self, kind, rng):
        logits = Parameter('logits', rng.standard_normal((3, 10)))
        if kind == 'categorical':
            targets, fn = scene_one_hot([1, 4, 7]), categorical_cross_entropy
        else:
            targets, fn = (rng.random((3, 10)) < 0.5).astype(np.float64), binary_cross_entropy

        def loss_fn(backward):
            loss, grad = fn(logits.value, targets)
            if backward:
                logits.grad += grad
            return loss

        assert finite_difference_check(loss_fn, [logits], tolerance=1e-6).passed

    def test_single_task_total(self, rng):
        out = ModelOutputs(tag_logits=rng.standard_normal((2, 80)))
        y = TaskLabels(tags=tags_multi_hot([[1, 2], [40]]))
        result = multi_task_loss(out, y, ['TAG'])
        assert result.total == result.per_task['TAG']
        assert set(result.grads) == {'TAG'}

    def test_weights_scale_gradients(self, rng):
        out = ModelOutputs(asc_logits=rng.standard_normal((2, 10)))
        y = TaskLabels(scene=scene_one_hot([0, 1]))
        plain = multi_task_loss(out, y, ['ASC'])
        weighted = multi_task_loss(out, y, ['ASC'], weights={'ASC': 2.0})
        assert weighted.total == pytest.approx(2 * plain.total)
        np.testing.assert_allclose(weighted.grads['ASC'], 2 * plain.grads['ASC'])

    def test_missing_labels(self, rng):
        out = ModelOutputs(asc_logits=rng.standard_normal((2, 10)))
        with pytest.raises(MissingLabelsError):
            multi_task_loss(out, TaskLabels(tags=np.zeros((2, 80))), ['ASC'])

    def test_label_shape_mismatch(self, rng):
        out = ModelOutputs(sed_logits=rng.standard_normal((2, 8, 14)))
        with pytest.raises(ShapeMismatchError):
            multi_task_loss(out, TaskLabels(events=np.zeros((2, 9, 14))), ['SED'])


class TestMixup:

    def test_lambda_one_is_identity(self, rng):
        x = rng.standard_normal((4, 16, 128)).astype(np.float32)
        y = TaskLabels(scene=scene_one_hot([0, 1, 2, 3]))
        mixed_x, mixed_y, lam, _ = mixup_batch(x, y, rng, lam=1.0)
        assert lam == 1.0
        np.testing.assert_array_equal(mixed_x, x)
        np.testing.assert_array_equal(mixed_y.scene, y.scene)

    def test_half_mix(self, rng):
        x = rng.standard_normal((6, 16, 128))
        y = TaskLabels(scene=scene_one_hot([0, 1, 2, 3, 4, 5], dtype=np.float64))
        mixed_x, mixed_y, lam, perm = mixup_batch(x, y, rng, lam=0.5)
        np.testing.assert_allclose(mixed_x, 0.5 * (x + x[perm]))
        np.testing.assert_allclose(mixed_y.scene.sum(axis=1), 1.0)
        for i, j in enumerate(perm):
            expected = np.zeros(10)
            expected[i] += 0.5
            expected[j] += 0.5
            np.testing.assert_allclose(mixed_y.scene[i], expected)

    def test_drawn_lambda_in_unit_interval(self, rng):
        y = TaskLabels(tags=tags_multi_hot([[1], [2], [3]]))
        _, mixed_y, lam, _ = mixup_batch(np.zeros((3, 16, 128)), y, rng, alpha=0.4)
        assert 0.0 <= lam <= 1.0
        assert np.all((mixed_y.tags >= 0) & (mixed_y.tags <= 1))

    def test_needs_two_examples(self, rng):
        with pytest.raises(MixupBatchError):
            mixup_batch(np.zeros((1, 16, 128)), TaskLabels(scene=scene_one_hot([0])), rng)


class TestEventRoll:

    def test_events_survive_rasterization(self):
        events = [(0.5, 1.3, 2), (2.0, 2.72, 5), (3.1, 3.5, 2)]
        roll = events_to_roll(events, n_frames=50, frame_hop_s=0.08)
        recovered = roll_to_events(roll, frame_hop_s=0.08)
        assert len(recovered) == len(events)
        for (on, off, cls), (r_on, r_off, r_cls) in zip(sorted(events), recovered):
            assert r_cls == cls
            assert abs(r_on - on) <= 0.08
            assert abs(r_off - off) <= 0.08

    def test_half_frame_rule(self):
        roll = events_to_roll([(0.0, 0.04, 0), (0.16, 0.19, 1)], n_frames=4, frame_hop_s=0.08)
        assert roll[0, 0] == 1
        assert roll[:, 1].sum() == 0

    def test_labels_validate_shapes(self):
        with pytest.raises(ShapeMismatchError):
            TaskLabels(scene=np.zeros((2, 9)))
        with pytest.raises(InvalidArgumentError):
            TaskLabels(scene=np.zeros((2, 10)))


class TestCheckpoint:

    def test_save_load_save_is_byte_identical(self, tmp_path, model):
        first = save_checkpoint(Checkpoint.from_model(model, epoch=2, iteration=40, tasks=['SED', 'ASC'],
                                                      provenance={'seed': 3}), tmp_path / 'a.ckpt')
        second = save_checkpoint(load_checkpoint(first), tmp_path / 'b.ckpt')
        assert (tmp_path / 'a.ckpt').read_bytes() == (tmp_path / 'b.ckpt').read_bytes()
        ckpt = load_checkpoint(second)
        assert (ckpt.epoch, ckpt.iteration, ckpt.tasks) == (2, 40, ('ASC', 'SED'))
        assert not (tmp_path / 'b.ckpt.tmp').exists()

    def test_restored_model_predicts_identically(self, model, rng):
        ckpt = Checkpoint.from_bytes(Checkpoint.from_model(model, provenance={'seed': 3}).to_bytes())
        restored = restore_model(ckpt)
        x = rng.standard_normal((2, 32, 128))
        a, b = model.forward(x), restored.forward(x)
        np.testing.assert_array_equal(a.asc_logits, b.asc_logits)
        np.testing.assert_array_equal(a.sed_roll, b.sed_roll)

    def test_incompatible_architecture(self):
        v1 = build_model(tiny_config('v1'))
        ckpt = Checkpoint.from_model(build_model(tiny_config('v3')))
        with pytest.raises(IncompatibleCheckpointError):
            load_model_state(v1, ckpt)

    def test_corrupt_files(self, tmp_path, model):
        data = Checkpoint.from_model(model).to_bytes()
        with pytest.raises(CheckpointError):
            Checkpoint.from_bytes(b'JUNK' + data[4:])
        with pytest.raises(CheckpointError):
            Checkpoint.from_bytes(data[:-8])
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / 'missing.ckpt')


class TestModelGradients:

    def test_all_heads(self, variant):
        report = check_model_gradients(tiny_config(variant), tolerance=1e-3, seed=1)
        assert report.passed, report.table

    @pytest.mark.parametrize('task', ['ASC', 'TAG', 'SED'])
    def test_single_head(self, task):
        report = check_model_gradients(tiny_config('v3'), tolerance=1e-3, active=[task], seed=2, max_entries=4)
        assert report.passed, report.table
