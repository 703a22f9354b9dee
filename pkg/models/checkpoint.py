"""
Versioned checkpoint files.

Layout: magic b'DCNT', uint32 format version, uint32 header length, a UTF-8
JSON header (sorted keys), then every tensor as little-endian float32 in
header order. The header carries no timestamps, so equal state always
serializes to equal bytes.
"""
import json
import logging
import os
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from errors import CheckpointError, IncompatibleCheckpointError
from models.architecture import ArchitectureConfig
from nn.optim import AdamState

logger = logging.getLogger(__name__)

MAGIC = b'DCNT'
FORMAT_VERSION = 1
PREAMBLE = np.dtype([('magic', 'S4'), ('version', '<u4'), ('header_len', '<u4')])
KINDS = ('param', 'buffer', 'adam_m', 'adam_v')


@dataclass
class Checkpoint:
    """
    Model and optimizer state at an epoch boundary.

    Attributes:
        config (ArchitectureConfig): Architecture the tensors belong to
        epoch (int): Completed epochs
        iteration (int): Completed iterations
        tasks (tuple): Tasks trained so far
        params (OrderedDict): Parameter name -> float32 array
        buffers (OrderedDict): Buffer name -> array (batch-norm statistics)
        adam (dict): Parameter name -> AdamState (empty when not saved)
        provenance (dict): Free-form JSON metadata (seed, parent checkpoint, ...)
    """
    config: ArchitectureConfig
    epoch: int = 0
    iteration: int = 0
    tasks: tuple = ()
    params: OrderedDict = field(default_factory=OrderedDict)
    buffers: OrderedDict = field(default_factory=OrderedDict)
    adam: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    @property
    def variant(self):
        return self.config.variant

    @classmethod
    def from_model(cls, model, optimizer=None, epoch=0, iteration=0, tasks=(), provenance=None):
        params = OrderedDict((name, p.value.astype(np.float32)) for name, p in model.named_parameters())
        buffers = OrderedDict((name, np.asarray(v).astype(np.float32)) for name, v in model.named_buffers())
        adam = {}
        if optimizer is not None:
            for name, state in optimizer.state_dict().items():
                adam[name] = AdamState(state.m.astype(np.float32), state.v.astype(np.float32), state.t,
                                       state.lr, state.beta1, state.beta2, state.eps)
        return cls(model.config, int(epoch), int(iteration), tuple(sorted(tasks)), params, buffers, adam,
                   dict(provenance or {}))

    def to_bytes(self):
        tensors = []
        for name, value in self.params.items():
            tensors.append(('param', name, value))
        for name, value in self.buffers.items():
            tensors.append(('buffer', name, value))
        for name in sorted(self.adam):
            tensors.append(('adam_m', name, self.adam[name].m))
            tensors.append(('adam_v', name, self.adam[name].v))

        index = []
        offset = 0
        payload = []
        for kind, name, value in tensors:
            data = np.ascontiguousarray(value, dtype='<f4')
            index.append({'kind': kind, 'name': name, 'shape': list(data.shape), 'offset': offset})
            offset += data.size
            payload.append(data.tobytes())

        first = next(iter(self.adam.values()), None)
        header = {
            'format_version': FORMAT_VERSION,
            'variant': self.variant,
            'config': self.config.to_dict(),
            'config_hash': self.config.config_hash(),
            'epoch': self.epoch,
            'iteration': self.iteration,
            'tasks': list(self.tasks),
            'tensors': index,
            'adam': None if first is None else {
                'lr': first.lr, 'beta1': first.beta1, 'beta2': first.beta2, 'eps': first.eps,
                'steps': {name: int(self.adam[name].t) for name in sorted(self.adam)},
            },
            'provenance': self.provenance,
        }
        header_bytes = json.dumps(header, sort_keys=True, separators=(',', ':')).encode('utf-8')
        preamble = np.array([(MAGIC, FORMAT_VERSION, len(header_bytes))], dtype=PREAMBLE).tobytes()
        return preamble + header_bytes + b''.join(payload)

    @classmethod
    def from_bytes(cls, data):
        if len(data) < PREAMBLE.itemsize:
            raise CheckpointError("truncated checkpoint")
        preamble = np.frombuffer(data[:PREAMBLE.itemsize], dtype=PREAMBLE)[0]
        if bytes(preamble['magic']) != MAGIC:
            raise CheckpointError("not a DcaseNet checkpoint")
        if int(preamble['version']) != FORMAT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {int(preamble['version'])}")
        start = PREAMBLE.itemsize
        end = start + int(preamble['header_len'])
        try:
            header = json.loads(data[start:end].decode('utf-8'))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"corrupt checkpoint header: {exc}") from exc

        config = ArchitectureConfig.from_dict(header['config'])
        if config.config_hash() != header['config_hash']:
            raise CheckpointError("config hash does not match the stored architecture")
        values = np.frombuffer(data[end:], dtype='<f4')
        total = sum(int(np.prod(t['shape'], dtype=np.int64)) for t in header['tensors'])
        if values.size != total:
            raise CheckpointError(f"expected {total} tensor values, found {values.size}")

        ckpt = cls(config, header['epoch'], header['iteration'], tuple(header['tasks']),
                   provenance=header['provenance'])
        moments = {}
        for t in header['tensors']:
            count = int(np.prod(t['shape'], dtype=np.int64))
            value = values[t['offset']:t['offset'] + count].reshape(t['shape']).astype(np.float32)
            if t['kind'] == 'param':
                ckpt.params[t['name']] = value
            elif t['kind'] == 'buffer':
                ckpt.buffers[t['name']] = value
            elif t['kind'] in ('adam_m', 'adam_v'):
                moments.setdefault(t['name'], {})[t['kind']] = value
            else:
                raise CheckpointError(f"unknown tensor kind {t['kind']!r}")
        adam = header['adam']
        for name, pair in moments.items():
            ckpt.adam[name] = AdamState(pair['adam_m'], pair['adam_v'], adam['steps'][name], adam['lr'],
                                        adam['beta1'], adam['beta2'], adam['eps'])
        return ckpt


def save_checkpoint(ckpt, path):
    """Write a checkpoint atomically (temp file + rename)."""
    path = os.fspath(path)
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    tmp = path + '.tmp'
    with open(tmp, 'wb') as f:
        f.write(ckpt.to_bytes())
    os.replace(tmp, path)
    logger.info("Saved checkpoint %s (epoch %d, iteration %d)", path, ckpt.epoch, ckpt.iteration)
    return path


def load_checkpoint(path):
    try:
        with open(path, 'rb') as f:
            data = f.read()
    except FileNotFoundError as exc:
        raise CheckpointError(f"checkpoint not found: {path}") from exc
    return Checkpoint.from_bytes(data)


def restore_model(ckpt, dtype=np.float32):
    """
    Build the checkpoint's architecture and load its parameters and buffers.
    """
    from models import build_model

    model = build_model(ckpt.config, seed=ckpt.provenance.get('seed', 0), dtype=dtype)
    load_model_state(model, ckpt)
    return model


def load_model_state(model, ckpt):
    params = dict(model.named_parameters())
    missing = set(params) - set(ckpt.params)
    extra = set(ckpt.params) - set(params)
    if missing or extra:
        raise IncompatibleCheckpointError(
            f"parameter names differ (missing {sorted(missing)[:3]}, unexpected {sorted(extra)[:3]})")
    for name, param in params.items():
        if ckpt.params[name].shape != param.shape:
            raise IncompatibleCheckpointError(f"{name}: shape {ckpt.params[name].shape} != {param.shape}")
        param.assign(ckpt.params[name])
    model.load_buffers(ckpt.buffers)
