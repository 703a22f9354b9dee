"""
Exception hierarchy for the DcaseNet pipeline.
"""


class DcaseNetError(Exception):
    """Base class for every error raised by this package."""


# Audio
class AudioFileNotFoundError(DcaseNetError, FileNotFoundError):
    pass


class UnsupportedEncodingError(DcaseNetError):
    pass


class EmptyAudioError(DcaseNetError):
    pass


class InvalidWaveformError(DcaseNetError):
    pass


class ManifestError(DcaseNetError):
    pass


class ToySpecError(DcaseNetError):
    pass


# Features
class SampleRateMismatchError(DcaseNetError):
    pass


class SegmentTooShortError(DcaseNetError):
    pass


class InvalidCropError(DcaseNetError):
    pass


class FeatureCacheError(DcaseNetError):
    pass


# Neural network kernels
class ShapeMismatchError(DcaseNetError):
    pass


class RunningStatsUnsetError(DcaseNetError):
    pass


class NonFiniteGradientError(DcaseNetError):
    """Raised by the optimizer when a gradient holds NaN or inf."""

    def __init__(self, param_name):
        super().__init__(f"non-finite gradient in parameter '{param_name}'")
        self.param_name = param_name


class NonDeterministicLossError(DcaseNetError):
    pass


# Models
class InvalidArchitectureError(DcaseNetError):
    pass


class TooFewFramesError(DcaseNetError):
    pass


class MissingLabelsError(DcaseNetError):
    pass


class MixupBatchError(DcaseNetError):
    pass


class CheckpointError(DcaseNetError):
    pass


class IncompatibleCheckpointError(CheckpointError):
    pass


# Training
class EmptyManifestError(DcaseNetError):
    pass


class NonFiniteLossError(DcaseNetError):
    """Raised when training produces a NaN or inf loss."""

    def __init__(self, iteration, last_checkpoint=None):
        message = f"non-finite loss at iteration {iteration}"
        if last_checkpoint is not None:
            message += f"; last good checkpoint: {last_checkpoint}"
        super().__init__(message)
        self.iteration = iteration
        self.last_checkpoint = last_checkpoint


class MetricTaskMismatchError(DcaseNetError):
    pass


# Metrics
class MisalignedRollError(DcaseNetError):
    pass


class EmptyLabelSetError(DcaseNetError):
    pass


# CLI
class ConfigError(DcaseNetError):
    pass


# Arguments and layer state
class InvalidArgumentError(DcaseNetError, ValueError):
    pass


class LayerStateError(DcaseNetError, RuntimeError):
    pass
