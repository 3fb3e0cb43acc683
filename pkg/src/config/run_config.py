"""Run configuration sections (every field has a default; unknown keys are rejected on load)"""

from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Tuple

from .config import (
    ACTION_DIM,
    BET_CLUSTERS,
    CTRL_HZ,
    DEFAULT_ATTN_HEADS,
    DEFAULT_BATCH_SIZE,
    DEFAULT_CHUNK_LEN,
    DEFAULT_COND_DIM,
    DEFAULT_DEMOS_PER_TASK,
    DEFAULT_HIDDEN_DIM,
    DEFAULT_K_GOAL,
    DEFAULT_LAYERS,
    DEFAULT_LR,
    DEFAULT_MAX_RETRIES,
    DEFAULT_TRAIN_STEPS,
    DEFAULT_VIEWS,
    DEFAULT_VISION_CHANNELS,
    DIFFUSION_BETA_END,
    DIFFUSION_BETA_START,
    DIFFUSION_STEPS,
    ENSEMBLE_M,
    FOCAL_GAMMA,
    GMM_MODES,
    IMAGE_SIZE,
    NUM_BINS,
    OFFSET_WEIGHT,
    POLICY_HZ,
    RVQ_CODES,
    RVQ_COMMITMENT,
    RVQ_EMA_DECAY,
    RVQ_LATENT_DIM,
    RVQ_LAYERS,
    resolve_size_preset,
)


@dataclass
class SuiteConfig:
    path: str = ""                       # JSON suite file; empty = built-in 8-task suite
    image_size: int = IMAGE_SIZE
    views: Tuple[str, ...] = DEFAULT_VIEWS


@dataclass
class DataConfig:
    demo_path: str = ""                  # demo file for train/fit-tokenizer/ablate
    per_task: int = DEFAULT_DEMOS_PER_TASK
    seed: int = 0
    noise_std: float = 0.0               # Gaussian expert action noise
    bimodal: bool = False                # random push orbit direction
    max_retries: int = DEFAULT_MAX_RETRIES


@dataclass
class PolicyConfig:
    """Architecture and optimisation hyperparameters of one policy."""

    trunk: str = "transformer"
    head: str = "mlp"
    size: Optional[str] = None           # model-size preset, overrides layers/head widths
    history: int = 1                     # h
    chunk_len: int = DEFAULT_CHUNK_LEN   # H
    use_chunking: bool = True
    last_step_only: bool = False
    hidden_dim: int = DEFAULT_HIDDEN_DIM
    cond_dim: int = DEFAULT_COND_DIM
    layers: int = DEFAULT_LAYERS
    attn_heads: int = DEFAULT_ATTN_HEADS
    vision_channels: Tuple[int, ...] = DEFAULT_VISION_CHANNELS
    separate_encoders: bool = False
    trunk_input: str = "separate"
    mlp_trunk_hidden: int = 512
    head_hidden: int = 256
    goal_mode: str = "text"
    k_goal: int = DEFAULT_K_GOAL
    use_film: bool = True
    zero_goal: bool = False
    ensemble_m: float = ENSEMBLE_M
    num_bins: int = NUM_BINS
    gmm_modes: int = GMM_MODES
    bet_clusters: int = BET_CLUSTERS
    focal_gamma: float = FOCAL_GAMMA
    offset_weight: float = OFFSET_WEIGHT
    rvq_layers: int = RVQ_LAYERS
    rvq_codes: int = RVQ_CODES
    rvq_latent_dim: int = RVQ_LATENT_DIM
    rvq_commitment: float = RVQ_COMMITMENT
    rvq_ema_decay: float = RVQ_EMA_DECAY
    rvq_steps: int = 3000
    rvq_batch_size: int = 256
    rvq_lr: float = 1e-3
    diffusion_steps: int = DIFFUSION_STEPS
    beta_start: float = DIFFUSION_BETA_START
    beta_end: float = DIFFUSION_BETA_END
    lr: float = DEFAULT_LR
    batch_size: int = DEFAULT_BATCH_SIZE
    steps: int = DEFAULT_TRAIN_STEPS
    seed: int = 0

    @property
    def effective_chunk_len(self):
        """H actually used: chunking off means single-action prediction."""
        return self.chunk_len if self.use_chunking else 1

    def chunk_dim(self, action_dim=ACTION_DIM):
        return self.effective_chunk_len * action_dim

    @property
    def includes_goal_token(self):
        """Goal token enters the trunk unless text goals are already carried by FiLM."""
        return self.goal_mode != "text" or not self.use_film

    def resolved(self):
        """Copy with the model-size preset applied."""
        overrides = resolve_size_preset(self.size)
        return replace(self, **overrides) if overrides else self


@dataclass
class TrainConfig:
    eval_every: int = 2000               # 0 = only evaluate at the end
    eval_rollouts: int = 5               # rollouts per task for training snapshots
    log_every: int = 200


@dataclass
class EvalConfig:
    rollouts_per_task: int = 10
    seed: int = 0
    deterministic: bool = True
    zero_goal: bool = False


@dataclass
class DeployConfig:
    policy_hz: int = POLICY_HZ
    ctrl_hz: int = CTRL_HZ
    interpolation: str = "min_jerk"
    segment_horizon: float = 0.0         # seconds; 0 = one policy period
    episodes_per_task: int = 2
    seed: int = 0


@dataclass
class AblateConfig:
    axes: Dict[str, List[str]] = field(default_factory=dict)
    seeds: Tuple[int, ...] = (0,)
    workers: int = 1
    history_len: int = 3                 # h used by the 'multi' and 'last' history arms
    rollouts_per_task: int = 10


@dataclass
class RunConfig:
    suite: SuiteConfig = field(default_factory=SuiteConfig)
    data: DataConfig = field(default_factory=DataConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    deploy: DeployConfig = field(default_factory=DeployConfig)
    ablate: AblateConfig = field(default_factory=AblateConfig)

    def to_dict(self):
        return asdict(self)


SECTION_TYPES = {
    "suite": SuiteConfig,
    "data": DataConfig,
    "policy": PolicyConfig,
    "train": TrainConfig,
    "eval": EvalConfig,
    "deploy": DeployConfig,
    "ablate": AblateConfig,
}
