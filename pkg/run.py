#!/usr/bin/env python
"""
Command-line entry point for DcaseNet feature extraction, training,
fine-tuning, evaluation, scoring and gradient checking.
"""
import argparse
import json
import logging
import os
import sys

logger = logging.getLogger('dcasenet')

SUBCOMMANDS = ('features', 'synth', 'train', 'finetune', 'evaluate', 'score', 'gradcheck')
THREAD_ENV_VARS = ('OMP_NUM_THREADS', 'OPENBLAS_NUM_THREADS', 'MKL_NUM_THREADS')


class GradientCheckFailed(Exception):
    pass


def limit_native_threads(threads):
    """Cap BLAS/OpenMP pools; takes effect for libraries not yet imported."""
    for name in THREAD_ENV_VARS:
        os.environ[name] = str(threads)


def add_run_flags(parser):
    """Flags mirroring run config keys; unset flags keep the file values."""
    parser.add_argument('--config', help='Run config JSON file')
    parser.add_argument('--variant', choices=('v1', 'v2', 'v3'), help='Model variant')
    parser.add_argument('--tasks', nargs='+', choices=('ASC', 'TAG', 'SED'), help='Subset of configured tasks')
    parser.add_argument('--epochs', type=int, help='Number of epochs')
    parser.add_argument('--iterations-per-epoch', type=int, help='Iterations per epoch')
    parser.add_argument('--lr', type=float, help='Adam learning rate')
    parser.add_argument('--seed', type=int, help='Sampling, Mix-up and dropout seed')
    parser.add_argument('--mixup', dest='mixup', action='store_true', default=None, help='Enable Mix-up')
    parser.add_argument('--no-mixup', dest='mixup', action='store_false', help='Disable Mix-up')
    parser.add_argument('--mixup-alpha', type=float, help='Mix-up Beta parameter')
    parser.add_argument('--alternating', action='store_true', default=None,
                        help='One optimizer step per task batch instead of per iteration')
    parser.add_argument('--output-dir', help='Run directory for checkpoints and logs')


def build_parser():
    parser = argparse.ArgumentParser(prog='dcasenet', description='DcaseNet joint ASC/TAG/SED pipeline')
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--log-level', default='INFO', choices=('DEBUG', 'INFO', 'WARNING', 'ERROR'),
                        help='Logging level (stderr)')
    common.add_argument('--threads', type=int, default=None, help='Worker and native kernel threads')
    common.add_argument('--deterministic', action='store_true', default=None,
                        help='Serialize batch preparation and force single-threaded kernels')
    sub = parser.add_subparsers(dest='command', metavar='{' + ','.join(SUBCOMMANDS) + '}')
    sub.required = True

    p = sub.add_parser('features', parents=[common], help='Extract log-mel feature caches')
    p.add_argument('inputs', nargs='*', help='WAV files')
    p.add_argument('--manifest', help='Manifest whose segments are featurized')
    p.add_argument('--out-dir', required=True, help='Directory receiving .lmel caches')

    p = sub.add_parser('synth', parents=[common], help='Write the synthetic toy corpus')
    p.add_argument('--out-dir', required=True, help='Corpus directory (train/ and eval/ are created)')
    p.add_argument('--seed', type=int, default=None, help='Corpus seed')

    p = sub.add_parser('train', parents=[common], help='Joint (or single-task) training')
    add_run_flags(p)

    p = sub.add_parser('finetune', parents=[common], help='Fine-tune a checkpoint on one task')
    add_run_flags(p)
    p.add_argument('--checkpoint', required=True, help='Jointly trained checkpoint')
    p.add_argument('--task', required=True, choices=('ASC', 'TAG', 'SED'), help='Target task')

    p = sub.add_parser('evaluate', parents=[common], help='Evaluate a checkpoint')
    p.add_argument('--config', required=True, help='Run config JSON file')
    p.add_argument('--checkpoint', required=True, help='Checkpoint to evaluate')
    p.add_argument('--tasks', nargs='+', choices=('ASC', 'TAG', 'SED'), help='Tasks to evaluate')
    p.add_argument('--report', help='Metric report path (JSON Lines)')
    p.add_argument('--predictions', help='Per-segment prediction export (JSON Lines)')

    p = sub.add_parser('score', parents=[common], help='Score exported predictions')
    p.add_argument('--task', required=True, choices=('ASC', 'TAG', 'SED'), help='Task of the predictions')
    p.add_argument('--manifest', required=True, help='Manifest with reference labels')
    p.add_argument('--predictions', required=True, help='Prediction JSON Lines file')
    p.add_argument('--report', help='Metric report path (JSON Lines)')

    p = sub.add_parser('gradcheck', parents=[common], help='Finite-difference gradient check')
    p.add_argument('--config', help='Run config JSON file (architecture section is used)')
    p.add_argument('--variant', choices=('v1', 'v2', 'v3'), help='Model variant')
    p.add_argument('--tol', type=float, default=1e-3, help='Maximum relative error')
    p.add_argument('--max-entries', type=int, default=8, help='Sampled entries per parameter tensor')
    p.add_argument('--seed', type=int, default=0, help='Weight, input and sampling seed')
    return parser


def load_config(args):
    from utils.run_config import RunConfig, apply_overrides, load_run_config

    cfg = load_run_config(args.config) if getattr(args, 'config', None) else RunConfig()
    if getattr(args, 'deterministic', None):
        args.threads = 1
    return apply_overrides(cfg, args)


def cmd_features(args):
    from audio.manifest import load_manifest, resolve_path
    from audio.resample import resample_to_24k
    from audio.wav import load_wav
    from features.cache import write_feature_cache
    from features.melspec import log_mel_spectrogram

    paths = list(args.inputs)
    if args.manifest:
        root = os.path.dirname(os.path.abspath(args.manifest))
        paths += [resolve_path(entry, root) for entry in load_manifest(args.manifest)]
    for path in paths:
        spec = log_mel_spectrogram(resample_to_24k(load_wav(path)))
        out = os.path.join(args.out_dir, os.path.splitext(os.path.basename(path))[0] + '.lmel')
        write_feature_cache(out, spec)
        logger.info("%s: %d frames -> %s", path, spec.num_frames, out)
    print(json.dumps({'written': len(paths), 'out_dir': args.out_dir}))
    return 0


def cmd_synth(args):
    from audio.manifest import write_manifest
    from audio.synth import ToyCorpusSpec, synthesize_toy_dataset
    from config import RANDOM_SEED

    seed = args.seed if args.seed is not None else RANDOM_SEED
    tasks = {}
    for split, split_seed in (('train', seed), ('eval', seed + 1)):
        split_dir = os.path.join(args.out_dir, split)
        _, entries = synthesize_toy_dataset(ToyCorpusSpec(seed=split_seed), split_dir)
        for task in ('ASC', 'TAG', 'SED'):
            name = f"{task.lower()}.jsonl"
            write_manifest([e for e in entries if e.task == task], os.path.join(split_dir, name))
            key = 'manifest' if split == 'train' else 'eval_manifest'
            tasks.setdefault(task, {})[key] = f"{split}/{name}"
    for task, (batch_size, crop_s) in {'ASC': (8, 2.0), 'TAG': (8, 2.0), 'SED': (4, 6.0)}.items():
        tasks[task].update(batch_size=batch_size, crop_s=crop_s)
    run_config = {
        'variant': 'v3',
        'architecture': {'preset': 'tiny'},
        'tasks': tasks,
        'schedule': {'iterations_per_epoch': 50, 'epochs': 3, 'lr': 0.003, 'seed': seed},
        'mixup': {'enabled': False},
        'deterministic': True,
        'output_dir': 'run',
    }
    config_path = os.path.join(args.out_dir, 'toy_run.json')
    with open(config_path, 'w', encoding='utf-8') as f:
        json.dump(run_config, f, indent=2, sort_keys=True)
    print(json.dumps({'out_dir': args.out_dir, 'config': config_path}))
    return 0


def cmd_train(args):
    from models import build_model
    from training.engine import TrainingEngine

    cfg = load_config(args)
    model = build_model(cfg.architecture, seed=cfg.schedule.seed)
    engine = TrainingEngine(model, cfg.task_specs(), cfg.schedule, output_dir=cfg.output_path(), mixup=cfg.mixup,
                            mixup_alpha=cfg.mixup_alpha, alternating=cfg.alternating, loss_weights=cfg.loss_weights,
                            threads=cfg.threads, deterministic=cfg.deterministic, feature_cfg=cfg.features)
    engine.run(verbose=logger.isEnabledFor(logging.INFO))
    print(json.dumps({'checkpoint': engine.last_checkpoint_path, 'iterations': engine.iteration,
                      'best': engine.best}, sort_keys=True))
    return 0


def cmd_finetune(args):
    from models.checkpoint import load_checkpoint
    from training.engine import fine_tune_engine

    cfg = load_config(args)
    ckpt = load_checkpoint(args.checkpoint)
    target, = cfg.task_specs([args.task])
    engine = fine_tune_engine(ckpt, target, cfg.schedule, output_dir=cfg.output_path(), mixup=cfg.mixup,
                              mixup_alpha=cfg.mixup_alpha, alternating=cfg.alternating, loss_weights=cfg.loss_weights,
                              threads=cfg.threads, deterministic=cfg.deterministic, feature_cfg=cfg.features,
                              provenance={'parent': os.path.abspath(args.checkpoint)})
    engine.run(verbose=logger.isEnabledFor(logging.INFO))
    print(json.dumps({'checkpoint': engine.last_checkpoint_path, 'iterations': engine.iteration,
                      'best': engine.best}, sort_keys=True))
    return 0


def cmd_evaluate(args):
    from analysis.report import write_predictions, write_report
    from models.checkpoint import load_checkpoint, restore_model
    from training.evaluation import evaluate_task
    from training.sampler import WaveformStore

    cfg = load_config(args)
    model = restore_model(load_checkpoint(args.checkpoint))
    store = WaveformStore()
    reports, predictions = [], []
    for spec in cfg.task_specs(args.tasks):
        reports.append(evaluate_task(model, spec, store, cfg.features, predictions))
    for report in reports:
        print(report.to_json())
        logger.info("\n%s", report.to_text())
    if args.report:
        write_report(reports, args.report)
    if args.predictions:
        write_predictions(predictions, args.predictions)
    return 0


def cmd_score(args):
    from analysis.report import read_predictions, score_predictions, write_report
    from audio.manifest import load_manifest

    # Evaluation exports mix tasks; score only this task's entries and records
    entries = [e for e in load_manifest(args.manifest) if e.task == args.task]
    records = [r for r in read_predictions(args.predictions) if r.get('task') == args.task]
    report = score_predictions(args.task, records, entries)
    print(report.to_json())
    logger.info("\n%s", report.to_text())
    if args.report:
        write_report([report], args.report)
    return 0


def cmd_gradcheck(args):
    from models.architecture import tiny_config
    from models.gradients import check_model_gradients
    from utils.run_config import load_run_config

    arch = load_run_config(args.config).architecture if args.config else tiny_config()
    if args.variant:
        arch = arch.with_variant(args.variant)
    report = check_model_gradients(arch, args.tol, seed=args.seed, max_entries=args.max_entries)
    print(json.dumps(report.to_dict(), sort_keys=True))
    if not report.passed:
        raise GradientCheckFailed(f"max relative error {report.max_rel_err:.3e} exceeds {args.tol:g} "
                                  f"(worst: {report.worst_parameter})")
    return 0


COMMANDS = {
    'features': cmd_features,
    'synth': cmd_synth,
    'train': cmd_train,
    'finetune': cmd_finetune,
    'evaluate': cmd_evaluate,
    'score': cmd_score,
    'gradcheck': cmd_gradcheck,
}


def run_cli(argv=None):
    """
    Parse argv, run one subcommand and return its exit code.

    Pipeline errors exit 1 with a JSON object on stderr; usage errors exit 2.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2

    if args.deterministic:
        limit_native_threads(1)
    elif args.threads:
        limit_native_threads(args.threads)

    from errors import DcaseNetError
    from utils.logs import configure_logging

    configure_logging(args.log_level)

    try:
        return COMMANDS[args.command](args)
    except (DcaseNetError, GradientCheckFailed) as exc:
        sys.stderr.write(json.dumps({'error': type(exc).__name__, 'message': str(exc)}) + '\n')
        return 1


def main():
    sys.exit(run_cli())


if __name__ == '__main__':
    main()
