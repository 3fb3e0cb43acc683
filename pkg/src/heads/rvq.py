"""Residual vector-quantised autoencoder over chunk vectors (VQ-BeT tokenizer)"""

import math

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from ..config.config import RVQ_CODES, RVQ_COMMITMENT, RVQ_EMA_DECAY, RVQ_LATENT_DIM, RVQ_LAYERS
from ..nkernel.params import ParamStore, adam_step
from ..nkernel.rng import make_stream, seeded_init
from ..utils.errors import ContractViolation, StateError, TokenizerFitError
from ..utils.log_utils import log_info, log_progress


def laplace_smoothing(x, n_categories, eps=1e-5):
    return (x + eps) / (x.sum(dim=-1, keepdim=True) + n_categories * eps)


def duplicate_rows(codebook):
    """(K,) bool: row j equals some earlier row i < j exactly."""
    same = (codebook[:, None, :] == codebook[None, :, :]).all(dim=-1)
    return torch.triu(same, diagonal=1).any(dim=0)


def fresh_rows(candidates, existing, count, rng):
    """Up to count distinct candidate rows that do not occur in existing, in seeded random order."""
    unique = torch.unique(candidates, dim=0)
    if existing.shape[0]:
        taken = (unique[:, None, :] == existing[None, :, :]).all(dim=-1).any(dim=1)
        unique = unique[~taken]
    count = min(count, unique.shape[0])
    if count == 0:
        return unique[:0]
    pick = torch.as_tensor(rng.choice(unique.shape[0], count, replace=False), dtype=torch.long)
    return unique[pick]


def residual_quantize(latent, codebooks):
    """Greedy residual quantisation: stage l picks the code nearest to the stage-(l-1) residual.

    Args:
        latent: (N, E)
        codebooks: (L, K, E)

    Returns:
        quantized (N, E), indices (N, L) long, residuals list of L tensors (N, E) (stage inputs)
    """
    residual = latent
    quantized = torch.zeros_like(latent)
    indices, residuals = [], []
    for codebook in codebooks:
        residuals.append(residual)
        idx = torch.cdist(residual, codebook).argmin(dim=-1)
        chosen = codebook[idx]
        quantized = quantized + chosen
        residual = residual - chosen
        indices.append(idx)
    return quantized, torch.stack(indices, dim=-1), residuals


class RVQTokenizer(nn.Module):
    """Encoder (chunk -> latent), L residual codebooks of K codes, decoder (latent -> chunk).

    Codebooks are buffers updated by exponential moving averages of the
    assigned latents; the autoencoder is trained through a straight-through
    estimator.
    """

    def __init__(self, chunk_dim, layers=RVQ_LAYERS, codes=RVQ_CODES, latent_dim=RVQ_LATENT_DIM,
                 commitment=RVQ_COMMITMENT, ema_decay=RVQ_EMA_DECAY, hidden=128):
        super().__init__()
        self.chunk_dim = chunk_dim
        self.layers = layers
        self.codes = codes
        self.latent_dim = latent_dim
        self.commitment = commitment
        self.ema_decay = ema_decay
        self.encoder = nn.Sequential(nn.Linear(chunk_dim, hidden), nn.GELU(), nn.Linear(hidden, latent_dim))
        self.decoder = nn.Sequential(nn.Linear(latent_dim, hidden), nn.GELU(), nn.Linear(hidden, chunk_dim))
        self.register_buffer("codebooks", torch.zeros(layers, codes, latent_dim))
        self.register_buffer("cluster_size", torch.ones(layers, codes))
        self.register_buffer("embed_sum", torch.zeros(layers, codes, latent_dim))
        self.register_buffer("fitted", torch.tensor(False))

    def require_fitted(self):
        if not bool(self.fitted):
            raise StateError("Residual VQ tokenizer used before fitting (run fit-tokenizer)")

    def quantize(self, latent):
        return residual_quantize(latent, self.codebooks)

    def encode(self, chunks):
        """Code indices (N, L) of chunk vectors."""
        with torch.no_grad():
            return self.quantize(self.encoder(chunks))[1]

    def code_sum(self, indices):
        """Sum over stages of the selected codes, (N, E)."""
        return sum(self.codebooks[l][indices[:, l]] for l in range(self.layers))

    def decode_indices(self, indices):
        return self.decoder(self.code_sum(indices))

    def reconstruct(self, chunks):
        return self.decoder(self.quantize(self.encoder(chunks))[0])

    def init_codebooks(self, latents, rng):
        """Seed every stage's codes from distinct random stage inputs.

        A stage with fewer distinct inputs than codes repeats some of them;
        the repeats are re-seeded as dead codes once the inputs spread out.
        """
        with torch.no_grad():
            residual = latents
            for l in range(self.layers):
                rows = fresh_rows(residual, residual[:0], self.codes, rng)
                missing = self.codes - rows.shape[0]
                if missing:
                    extra = torch.as_tensor(rng.choice(residual.shape[0], missing), dtype=torch.long)
                    rows = torch.cat([rows, residual[extra]])
                self.codebooks[l].copy_(rows)
                self.embed_sum[l].copy_(rows)
                self.cluster_size[l].fill_(1.0)
                idx = torch.cdist(residual, self.codebooks[l]).argmin(dim=-1)
                residual = residual - self.codebooks[l][idx]

    def ema_update(self, residuals, indices):
        """Move each code toward the mean of the stage inputs assigned to it."""
        with torch.no_grad():
            for l in range(self.layers):
                onehot = F.one_hot(indices[:, l], self.codes).float()
                counts = onehot.sum(dim=0)
                sums = onehot.t() @ residuals[l]
                self.cluster_size[l].mul_(self.ema_decay).add_(counts, alpha=1 - self.ema_decay)
                self.embed_sum[l].mul_(self.ema_decay).add_(sums, alpha=1 - self.ema_decay)
                total = self.cluster_size[l].sum()
                smoothed = laplace_smoothing(self.cluster_size[l], self.codes) * total
                self.codebooks[l].copy_(self.embed_sum[l] / smoothed[:, None])

    def reseed_dead_codes(self, usage, residuals, rng):
        """Replace codes unused for a whole epoch, and repeated codes, by distinct random stage inputs.

        Returns:
            int: Number of re-seeded codes
        """
        reseeded = 0
        with torch.no_grad():
            for l in range(self.layers):
                stale = (usage[l] == 0) | duplicate_rows(self.codebooks[l])
                dead = torch.nonzero(stale).flatten()
                if dead.numel() == 0:
                    continue
                rows = fresh_rows(residuals[l], self.codebooks[l][~stale], dead.numel(), rng)
                dead = dead[:rows.shape[0]]
                self.codebooks[l][dead] = rows
                self.embed_sum[l][dead] = rows
                self.cluster_size[l][dead] = 1.0
                reseeded += dead.numel()
        return reseeded

    def distinct_codes(self):
        return not any(bool(duplicate_rows(codebook).any()) for codebook in self.codebooks)

    def training_loss(self, chunks):
        """Reconstruction MSE + commitment; returns (loss, stage inputs, indices)."""
        latent = self.encoder(chunks)
        quantized, indices, residuals = self.quantize(latent.detach())
        straight_through = latent + (quantized - latent).detach()
        recon = F.mse_loss(self.decoder(straight_through), chunks)
        commit = F.mse_loss(latent, quantized.detach())
        return recon + self.commitment * commit, residuals, indices


def rvq_fit(chunks, layers=RVQ_LAYERS, codes=RVQ_CODES, latent_dim=RVQ_LATENT_DIM, seed=0,
            steps=3000, batch_size=256, lr=1e-3, commitment=RVQ_COMMITMENT, ema_decay=RVQ_EMA_DECAY,
            log_every=0):
    """Fit a residual VQ tokenizer to chunk vectors.

    Args:
        chunks: (N, D) array or tensor of chunk vectors, N >= codes
        steps: Optimiser steps (one mini-batch each)

    Returns:
        RVQTokenizer: fitted tokenizer (fitted flag set)
    """
    data = torch.as_tensor(np.asarray(chunks, dtype=np.float32))
    if data.dim() != 2:
        raise ContractViolation(f"Chunks must be (N, D), got {list(data.shape)}")
    n = data.shape[0]
    if n < codes:
        raise TokenizerFitError(f"Cannot fit {codes} codes per stage to {n} chunks")
    if not torch.isfinite(data).all():
        raise TokenizerFitError("Chunks contain non-finite values")
    distinct = torch.unique(data, dim=0).shape[0]
    if distinct < codes:
        raise TokenizerFitError(f"Fewer than {codes} distinct chunks ({distinct}); codes would repeat")

    with seeded_init(seed, "rvq"):
        tokenizer = RVQTokenizer(data.shape[1], layers, codes, latent_dim, commitment, ema_decay)
    rng = make_stream(seed, "rvq")
    with torch.no_grad():
        tokenizer.init_codebooks(tokenizer.encoder(data), rng)

    store = ParamStore.from_module(tokenizer)
    batch_size = min(batch_size, n)
    steps_per_epoch = max(1, math.ceil(n / batch_size))
    usage = torch.zeros(layers, codes)
    loss = torch.tensor(0.0)
    for step in range(1, steps + 1):
        batch = data[torch.as_tensor(rng.choice(n, batch_size, replace=False))]
        loss, residuals, indices = tokenizer.training_loss(batch)
        if not torch.isfinite(loss):
            raise TokenizerFitError(f"Residual VQ loss became non-finite at step {step}")
        grads = dict(zip(store.names(), torch.autograd.grad(loss, list(store.params.values()), allow_unused=True)))
        adam_step(store, grads, lr, inplace=True)
        tokenizer.ema_update(residuals, indices)
        for l in range(layers):
            usage[l] += torch.bincount(indices[:, l], minlength=codes).float()
        if step % steps_per_epoch == 0:
            with torch.no_grad():
                _, _, all_residuals = tokenizer.quantize(tokenizer.encoder(data))
            tokenizer.reseed_dead_codes(usage, all_residuals, rng)
            usage.zero_()
        if log_every and step % log_every == 0:
            log_progress(step, steps, loss=float(loss))

    if not tokenizer.distinct_codes():
        with torch.no_grad():
            _, _, all_residuals = tokenizer.quantize(tokenizer.encoder(data))
        tokenizer.reseed_dead_codes(torch.ones(layers, codes), all_residuals, rng)
    if not tokenizer.distinct_codes():
        raise TokenizerFitError("Residual VQ codebooks kept repeated codes; the chunks have too few distinct values")
    tokenizer.fitted.fill_(True)
    with torch.no_grad():
        mse = float(F.mse_loss(tokenizer.reconstruct(data), data))
    log_info(f"Residual VQ fitted: {layers}x{codes} codes, reconstruction MSE {mse:.6f}")
    return tokenizer
