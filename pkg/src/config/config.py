"""Configuration constants for the multi-task chunking policy stack"""

from pathlib import Path

# Project root directory (robust for subdir structure like config/config.py)
PROJECT_ROOT = Path(__file__).parent.parent.parent

# Folder paths
OUTPUT_DIR = PROJECT_ROOT / "output"

# Environment override prefix: TASKCHUNK__POLICY__CHUNK_LEN=5
ENV_PREFIX = "TASKCHUNK__"

# Point-mass environment
DT = 0.05               # seconds per env step at the training rate
V_MAX = 0.5             # world units per second at |action| = 1
KP = 5.0                # scripted expert proportional gain
ACTION_DIM = 2
PROPRIO_DIM = 4         # agent position + velocity
IMAGE_SIZE = 24         # G, rendered square image side in pixels
MIN_IMAGE_SIZE = 16     # four 2x poolings must leave at least one pixel
DEFAULT_VIEWS = ("scene", "wrist")
KNOWN_VIEWS = ("scene", "wrist")
WRIST_VIEW_SIZE = 0.5   # side of the agent-centred crop in world units
TASK_FAMILIES = ("reach", "push", "sequence")

# Geometry (world units)
AGENT_RADIUS = 0.04
BLOCK_RADIUS = 0.05
MARKER_RADIUS = 0.05
CONTACT_DISTANCE = AGENT_RADIUS + BLOCK_RADIUS
ORBIT_RADIUS = 0.13     # push expert circles the block at this distance

# Default episode lengths per family
EPISODE_LENGTHS = {
    "reach": 100,
    "sequence": 150,
    "push": 200,
}

# Demonstrations
DEFAULT_DEMOS_PER_TASK = 20
DEFAULT_EXPERT_NOISE = 0.05     # used when demos are generated with noise enabled
DEFAULT_MAX_RETRIES = 10

# Policy architecture defaults
DEFAULT_HIDDEN_DIM = 256        # d, token dimension
DEFAULT_COND_DIM = 128          # d_z, conditioning vector
DEFAULT_VISION_CHANNELS = (16, 32, 64, 128)
DEFAULT_LAYERS = 4
DEFAULT_ATTN_HEADS = 4
DEFAULT_CHUNK_LEN = 10          # H
DEFAULT_K_GOAL = 30             # intermediate goal offset
TRUNK_KINDS = ("mlp", "transformer")
HEAD_KINDS = ("mlp", "bins", "gmm", "bet", "vqbet", "diffusion")
GOAL_MODES = ("text", "goal_image", "intermediate")
TRUNK_INPUTS = ("separate", "concatenated")

# Head constants
FOCAL_GAMMA = 2.0
OFFSET_WEIGHT = 100.0
NUM_BINS = 256
GMM_MODES = 5
GMM_MIN_SCALE = 1e-4
BET_CLUSTERS = 64
KMEANS_MAX_ITERS = 100
RVQ_LAYERS = 2
RVQ_CODES = 16
RVQ_LATENT_DIM = 64
RVQ_COMMITMENT = 0.25
RVQ_EMA_DECAY = 0.99
DIFFUSION_STEPS = 50
DIFFUSION_BETA_START = 1e-4
DIFFUSION_BETA_END = 0.02
DIFFUSION_DECODE_SEED = 0       # fixed generator for deterministic decoding

# Chunk execution
ENSEMBLE_M = 0.01

# Optimizer
DEFAULT_LR = 1e-4
DEFAULT_BATCH_SIZE = 64
DEFAULT_TRAIN_STEPS = 20000
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8

# Deployment loop
POLICY_HZ = 10
CTRL_HZ = 100
INTERPOLATION_MODES = ("min_jerk", "zoh")

# Model-size presets: vary trunk depth and head width only
MODEL_SIZE_PRESETS = {
    'small': {"layers": 2, "head_hidden": 128, "mlp_trunk_hidden": 256},
    'base': {"layers": 4, "head_hidden": 256, "mlp_trunk_hidden": 512},
    'large': {"layers": 8, "head_hidden": 512, "mlp_trunk_hidden": 1024},   # layer count of the full-size recipe
}

# Ablation axes and their allowed values
ABLATION_AXES = {
    "trunk": TRUNK_KINDS,
    "size": tuple(MODEL_SIZE_PRESETS),
    "head": HEAD_KINDS,
    "chunking": ("on", "off"),
    "history": ("none", "multi", "last"),
    "goal": GOAL_MODES,
    "film": ("on", "off"),
    "encoder": ("shared", "separate"),
    "trunk_input": TRUNK_INPUTS,
}

# File names inside run directories
DEMO_FILENAME = "demos.bin"
SUITE_FILENAME = "suite.json"
TOKENIZER_FILENAME = "tokenizer.ckpt"
FINAL_CHECKPOINT = "final.ckpt"
BEST_CHECKPOINT = "best.ckpt"
METRICS_FILENAME = "metrics.csv"
RESOLVED_CONFIG_FILENAME = "resolved_config.json"
MANIFEST_FILENAME = "manifest.json"
METRICS_HEADER = ("step", "task_id", "loss", "success_rate", "seed")


def resolve_size_preset(size):
    """Look up the architecture overrides of a model-size preset

    Args:
        size: Preset name ('small', 'base', 'large') or None for no preset

    Returns:
        dict: Field overrides for the policy section (empty for None)
    """
    if size is None:
        return {}
    if size not in MODEL_SIZE_PRESETS:
        raise ValueError(f"Invalid model size '{size}'. Must be one of {list(MODEL_SIZE_PRESETS.keys())}")
    return dict(MODEL_SIZE_PRESETS[size])


def substeps_per_tick(policy_hz, ctrl_hz):
    """Number of control substeps per policy tick

    Args:
        policy_hz: Policy query rate
        ctrl_hz: Low-level controller rate, an integer multiple of policy_hz

    Returns:
        int: ctrl_hz // policy_hz
    """
    if policy_hz <= 0 or ctrl_hz <= 0:
        raise ValueError("Rates must be positive")
    if ctrl_hz % policy_hz != 0:
        raise ValueError(f"ctrl_hz ({ctrl_hz}) must be an integer multiple of policy_hz ({policy_hz})")
    return ctrl_hz // policy_hz
