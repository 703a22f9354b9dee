"""
Architecture configuration shared by all DcaseNet variants.
"""
import hashlib
import json
from dataclasses import asdict, dataclass, fields, replace

from config import (BN_EPS, BN_MOMENTUM, BRANCH_WIDTH, CONV_CHANNELS, DENSE_LAYERS, DENSE_WIDTH, DROPOUT,
                    FREQ_POOL, GRU_HIDDEN, HOP_MS, KERNEL_SIZE, MIN_FRAMES, MIXUP_ALPHA, N_MELS, NUM_EVENTS,
                    NUM_SCENES, NUM_TAGS, RESIDUAL_CHANNELS, TIME_POOL, VARIANTS)
from errors import InvalidArchitectureError

N_BLOCKS = 4


@dataclass(frozen=True)
class ArchitectureConfig:
    """
    Structural hyperparameters of a DcaseNet model.

    Attributes:
        variant (str): 'v1', 'v2' or 'v3'
        channels (tuple): Output channels of the four conv blocks
        time_pool (tuple): Time pooling factor per block
        freq_pool (tuple): Frequency pooling factor per block
        kernel_size (int): Conv kernel size
        gru_hidden (int): GRU hidden size per direction
        dense_width (int): Width of the dense head layers
        dense_layers (int): Layers per dense head
        dropout (float): Dropout rate in the dense heads
        branch_width (int): Width of the v3 task branches
        residual_channels (int): Channels of the v1 ASC residual block
        n_mels (int): Expected mel bands of the input
        num_scenes (int): ASC classes
        num_tags (int): TAG classes
        num_events (int): SED classes
        mixup_alpha (float): Beta distribution parameter for Mix-up
    """
    variant: str = 'v3'
    channels: tuple = CONV_CHANNELS
    time_pool: tuple = TIME_POOL
    freq_pool: tuple = FREQ_POOL
    kernel_size: int = KERNEL_SIZE
    gru_hidden: int = GRU_HIDDEN
    dense_width: int = DENSE_WIDTH
    dense_layers: int = DENSE_LAYERS
    dropout: float = DROPOUT
    branch_width: int = BRANCH_WIDTH
    residual_channels: int = RESIDUAL_CHANNELS
    n_mels: int = N_MELS
    num_scenes: int = NUM_SCENES
    num_tags: int = NUM_TAGS
    num_events: int = NUM_EVENTS
    mixup_alpha: float = MIXUP_ALPHA
    bn_momentum: float = BN_MOMENTUM
    bn_eps: float = BN_EPS

    def __post_init__(self):
        for name in ('channels', 'time_pool', 'freq_pool'):
            object.__setattr__(self, name, tuple(int(v) for v in getattr(self, name)))
        if self.variant not in VARIANTS:
            raise InvalidArchitectureError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        for name in ('channels', 'time_pool', 'freq_pool'):
            values = getattr(self, name)
            if len(values) != N_BLOCKS or min(values) < 1:
                raise InvalidArchitectureError(f"{name} needs {N_BLOCKS} positive entries, got {values}")
        if (self.num_scenes, self.num_tags, self.num_events) != (NUM_SCENES, NUM_TAGS, NUM_EVENTS):
            raise InvalidArchitectureError(
                f"class counts are fixed at ({NUM_SCENES}, {NUM_TAGS}, {NUM_EVENTS})")
        if self.kernel_size % 2 != 1:
            raise InvalidArchitectureError(f"kernel_size must be odd, got {self.kernel_size}")
        for name in ('gru_hidden', 'dense_width', 'dense_layers', 'branch_width', 'residual_channels'):
            if getattr(self, name) < 1:
                raise InvalidArchitectureError(f"{name} must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise InvalidArchitectureError(f"dropout must be in [0, 1), got {self.dropout}")
        if not self.mixup_alpha > 0:
            raise InvalidArchitectureError("mixup_alpha must be positive")
        if self.n_mels // self.freq_reduction < 1:
            raise InvalidArchitectureError(f"{self.n_mels} mel bands cannot be pooled by {self.freq_reduction}")

    @property
    def time_reduction(self):
        product = 1
        for p in self.time_pool:
            product *= p
        return product

    @property
    def freq_reduction(self):
        product = 1
        for p in self.freq_pool:
            product *= p
        return product

    @property
    def min_frames(self):
        return max(MIN_FRAMES, self.time_reduction)

    @property
    def pooled_hop_s(self):
        """float: Time between SED roll frames (0.08 s by default)."""
        return HOP_MS / 1000.0 * self.time_reduction

    def pooled_frames(self, n_frames):
        """Frames left after the per-block floor divisions in time."""
        for p in self.time_pool:
            n_frames //= p
        return n_frames

    def pooled_bands(self):
        bands = self.n_mels
        for p in self.freq_pool:
            bands //= p
        return bands

    def to_dict(self):
        d = asdict(self)
        for name in ('channels', 'time_pool', 'freq_pool'):
            d[name] = list(d[name])
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidArchitectureError(f"unknown architecture fields: {sorted(unknown)}")
        return cls(**d)

    def config_hash(self):
        """sha256 over the canonical JSON form."""
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()

    def with_variant(self, variant):
        return replace(self, variant=variant)


def tiny_config(variant='v3', **overrides):
    """
    Small architecture for gradient checks, tests and the toy corpus.
    """
    params = dict(variant=variant, channels=(4, 8, 8, 16), gru_hidden=8, dense_width=16,
                  dense_layers=2, branch_width=8, residual_channels=8)
    params.update(overrides)
    return ArchitectureConfig(**params)
