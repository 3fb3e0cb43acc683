"""Head construction from a policy config"""

from .bet_head import BeTHead
from .bins_head import BinsHead
from .diffusion_head import DiffusionHead
from .gmm_head import GMMHead
from .kmeans import ActionCodebook
from .mlp_head import MLPHead
from .rvq import RVQTokenizer
from .vqbet_head import VQBeTHead
from ..config.config import HEAD_KINDS
from ..utils.errors import ConfigError, ContractViolation


def build_head(config, feature_dim, chunk_dim, tokenizer=None):
    """Build the configured action head.

    Args:
        config: PolicyConfig (size preset already resolved)
        feature_dim: Trunk feature dimension d
        chunk_dim: H * A
        tokenizer: ActionCodebook for 'bet', RVQTokenizer for 'vqbet'; None builds
            an unfitted placeholder whose state is loaded from a checkpoint

    Returns:
        ActionHead
    """
    kind = config.head
    hidden = config.head_hidden
    if kind == "mlp":
        return MLPHead(feature_dim, chunk_dim, hidden)
    if kind == "bins":
        return BinsHead(feature_dim, chunk_dim, hidden, config.num_bins)
    if kind == "gmm":
        return GMMHead(feature_dim, chunk_dim, hidden, config.gmm_modes)
    if kind == "bet":
        head = BeTHead(feature_dim, chunk_dim, hidden, config.bet_clusters, config.focal_gamma, config.offset_weight)
        if tokenizer is not None:
            if not isinstance(tokenizer, ActionCodebook):
                raise ContractViolation("BeT head needs a k-means ActionCodebook")
            head.load_codebook(tokenizer)
        return head
    if kind == "vqbet":
        if tokenizer is None:
            tokenizer = RVQTokenizer(chunk_dim, config.rvq_layers, config.rvq_codes, config.rvq_latent_dim,
                                     config.rvq_commitment, config.rvq_ema_decay)
        elif not isinstance(tokenizer, RVQTokenizer):
            raise ContractViolation("VQ-BeT head needs a residual VQ tokenizer")
        return VQBeTHead(feature_dim, chunk_dim, hidden, tokenizer, config.focal_gamma, config.offset_weight)
    if kind == "diffusion":
        return DiffusionHead(feature_dim, chunk_dim, hidden, config.diffusion_steps, config.beta_start, config.beta_end)
    raise ConfigError(f"Unknown head '{kind}'. Must be one of {list(HEAD_KINDS)}")


def needs_tokenizer(head_kind):
    return head_kind in ("bet", "vqbet")
