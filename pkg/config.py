"""
Configuration parameters for DcaseNet feature extraction, models and training.
"""

# Audio Parameters
SAMPLE_RATE = 24000  # All segments are resampled to 24 kHz
PCM16_SCALE = 32768.0  # Symmetric negative endpoint maps -32768 to -1.0
RESAMPLE_TAPS_PER_PHASE = 64
RESAMPLE_KAISER_BETA = 8.6

# Feature Parameters
N_FFT = 2048
WIN_MS = 40
HOP_MS = 20
N_MELS = 128
MEL_FMIN = 0.0
LOG_FLOOR = 1e-10  # Applied to power mel energies before the natural log

# Architecture Parameters
VARIANTS = ('v1', 'v2', 'v3')
CONV_CHANNELS = (64, 128, 256, 512)  # Last block ends the conv stack at 512 filters
TIME_POOL = (2, 2, 1, 1)  # Total time pooling of 4 keeps SED at 80 ms resolution
FREQ_POOL = (2, 2, 2, 2)
KERNEL_SIZE = 3
GRU_HIDDEN = 512  # Per direction
DENSE_WIDTH = 1024
DENSE_LAYERS = 2
DROPOUT = 0.2
BRANCH_WIDTH = 256  # v3 task-specific branch layers
RESIDUAL_CHANNELS = 256  # v1 ASC residual block
BN_MOMENTUM = 0.9
BN_EPS = 1e-5

# Task Parameters
TASKS = ('ASC', 'TAG', 'SED')
NUM_SCENES = 10
NUM_TAGS = 80
NUM_EVENTS = 14
BATCH_SIZE_ASC = 32
BATCH_SIZE_TAG = 24
BATCH_SIZE_SED = 32
CROP_S_ASC = 5.0
CROP_S_TAG = 5.0
CROP_S_SED = 30.0
MIN_FRAMES = 16

# Training Parameters
ITERATIONS_PER_EPOCH = 500
EPOCHS = 160
LEARNING_RATE = 0.001
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
PROB_CLAMP = 1e-7
MIXUP_ALPHA = 0.4
LOSS_WEIGHTS = {'ASC': 1.0, 'TAG': 1.0, 'SED': 1.0}
WAVEFORM_CACHE_BYTES = 1 << 30  # Decoded audio held by the batch sampler

# Metric Parameters
SED_THRESHOLD = 0.5
SED_SEGMENT_S = 1.0

# Gradient Check Parameters
GRADCHECK_STEP = 1e-5
GRADCHECK_TOLERANCE = 1e-4
GRADCHECK_REL_FLOOR = 1e-8  # Denominator floor of the relative error

# Toy Corpus Parameters (desk-scale substitute for the challenge datasets)
TOY_SCENES = 4
TOY_SEGMENTS_PER_SCENE = 6
TOY_SCENE_DURATION_S = 4.0
TOY_TAGS = 6
TOY_TAG_SEGMENTS = 24
TOY_TAG_DURATION_RANGE = (1.0, 3.0)
TOY_EVENT_CLASSES = 4
TOY_SED_SEGMENTS = 8
TOY_SED_DURATION_S = 12.0
TOY_EVENT_DURATION_RANGE = (0.5, 2.0)
TOY_EVENTS_PER_SEGMENT = (2, 4)
TOY_NOISE_LEVEL = 0.01

# Random Seed for Reproducibility
RANDOM_SEED = 42
