"""Offline action tokenizer fitting for the BeT and VQ-BeT heads"""

import torch

from ..config.config import ACTION_DIM
from ..dataio.demos import all_chunk_targets
from ..heads.factory import needs_tokenizer
from ..heads.kmeans import ActionCodebook, kmeans_fit
from ..heads.rvq import RVQTokenizer, rvq_fit
from ..nkernel.checkpoint import load_checkpoint, save_checkpoint
from ..utils.errors import ConfigError, LoadError
from ..utils.log_utils import log_info


def fit_tokenizer(policy_config, demos):
    """Fit the tokenizer the configured head needs on all chunk targets of the demos.

    Returns:
        ActionCodebook for 'bet', RVQTokenizer for 'vqbet'
    """
    config = policy_config.resolved()
    if not needs_tokenizer(config.head):
        raise ConfigError(f"Head '{config.head}' does not use a tokenizer (only bet and vqbet do)")
    chunks = all_chunk_targets(demos, config.effective_chunk_len)
    log_info(f"Fitting {config.head} tokenizer on {len(chunks)} chunks of size {chunks.shape[1]}")
    if config.head == "bet":
        codebook = kmeans_fit(chunks, config.bet_clusters, seed=config.seed)
        log_info(f"k-means: {codebook.num_clusters} clusters, inertia {codebook.inertia:.6f}, "
                 f"{codebook.iterations} iterations")
        return codebook
    return rvq_fit(
        chunks,
        layers=config.rvq_layers,
        codes=config.rvq_codes,
        latent_dim=config.rvq_latent_dim,
        seed=config.seed,
        steps=config.rvq_steps,
        batch_size=config.rvq_batch_size,
        lr=config.rvq_lr,
        commitment=config.rvq_commitment,
        ema_decay=config.rvq_ema_decay,
        log_every=max(1, config.rvq_steps // 10),
    )


def _tokenizer_meta(config):
    return {
        "head": config.head,
        "chunk_dim": config.chunk_dim(ACTION_DIM),
        "bet_clusters": config.bet_clusters,
        "rvq_layers": config.rvq_layers,
        "rvq_codes": config.rvq_codes,
        "rvq_latent_dim": config.rvq_latent_dim,
    }


def save_tokenizer(path, tokenizer, policy_config):
    config = policy_config.resolved()
    meta = _tokenizer_meta(config)
    if isinstance(tokenizer, ActionCodebook):
        meta["inertia"] = tokenizer.inertia
        sections = {"kmeans": {"centroids": torch.as_tensor(tokenizer.centroids)}}
    else:
        sections = {"rvq": tokenizer.state_dict()}
    return save_checkpoint(path, sections, meta=meta)


def load_tokenizer(path, policy_config):
    """Load a tokenizer and check it matches the head configuration."""
    config = policy_config.resolved()
    ckpt = load_checkpoint(path)
    expected = _tokenizer_meta(config)
    relevant = ["head", "chunk_dim"] + (["bet_clusters"] if config.head == "bet"
                                        else ["rvq_layers", "rvq_codes", "rvq_latent_dim"])
    mismatched = [k for k in relevant if ckpt.meta.get(k) != expected[k]]
    if mismatched:
        raise LoadError(f"Tokenizer {path} was fitted for a different head configuration ({', '.join(mismatched)})")
    if config.head == "bet":
        centroids = ckpt.section("kmeans")["centroids"].numpy()
        return ActionCodebook(centroids, float(ckpt.meta.get("inertia", 0.0)))
    tokenizer = RVQTokenizer(config.chunk_dim(ACTION_DIM), config.rvq_layers, config.rvq_codes,
                             config.rvq_latent_dim, config.rvq_commitment, config.rvq_ema_decay)
    try:
        tokenizer.load_state_dict(ckpt.section("rvq"), strict=True)
    except RuntimeError as e:
        raise LoadError(f"Tokenizer {path} does not match the residual VQ architecture: {e}")
    return tokenizer
