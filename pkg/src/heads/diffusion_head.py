"""DDPM head over chunk vectors conditioned on the action feature"""

import math

import torch
import torch.nn.functional as F
from torch import nn

from .base import ActionHead, reduce
from ..config.config import DIFFUSION_DECODE_SEED
from ..utils.errors import ContractViolation, NumericalError


def linear_schedule(steps, beta_start, beta_end):
    """betas[s] and alphas_cumprod[s] for s = 0..S, with betas[0] = 0 and alpha_bar_0 = 1."""
    if steps < 1:
        raise ContractViolation(f"Diffusion needs at least one step, got {steps}")
    betas = torch.cat([torch.zeros(1), torch.linspace(beta_start, beta_end, steps)])
    alphas_cumprod = torch.cumprod(1.0 - betas, dim=0)
    return betas, alphas_cumprod


def timestep_embedding(steps, dim):
    """Sinusoidal embedding of integer steps, (N,) -> (N, dim)."""
    half = dim // 2
    freqs = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=torch.float32) / half)
    args = steps.float()[:, None] * freqs[None, :]
    return torch.cat([torch.sin(args), torch.cos(args)], dim=-1)


class DiffusionHead(ActionHead):
    """Noise-prediction denoiser: 3-layer MLP on [noisy chunk, feature, step embedding]."""

    def __init__(self, feature_dim, chunk_dim, hidden, steps, beta_start, beta_end, embed_dim=32):
        super().__init__(feature_dim, chunk_dim)
        self.steps = steps
        self.embed_dim = embed_dim
        betas, alphas_cumprod = linear_schedule(steps, beta_start, beta_end)
        self.register_buffer("betas", betas, persistent=False)
        self.register_buffer("alphas_cumprod", alphas_cumprod, persistent=False)
        self.denoiser = nn.Sequential(
            nn.Linear(chunk_dim + feature_dim + embed_dim, hidden),
            nn.SiLU(),
            nn.Linear(hidden, hidden),
            nn.SiLU(),
            nn.Linear(hidden, chunk_dim),
        )

    def q_sample(self, x0, step, noise):
        """Forward noising: sqrt(alpha_bar_s) x0 + sqrt(1 - alpha_bar_s) noise."""
        ab = self.alphas_cumprod[step].reshape(-1, *([1] * (x0.dim() - 1)))
        return ab.sqrt() * x0 + (1.0 - ab).sqrt() * noise

    def predict_noise(self, noisy, feature, step):
        emb = timestep_embedding(step, self.embed_dim)
        return self.denoiser(torch.cat([noisy, feature, emb], dim=-1))

    def loss(self, feature, target, reduction="mean", generator=None):
        self.check_inputs(feature, target)
        B = feature.shape[0]
        step = torch.randint(1, self.steps + 1, (B,), generator=generator)
        noise = torch.randn(B, self.chunk_dim, generator=generator)
        pred = self.predict_noise(self.q_sample(target, step, noise), feature, step)
        return reduce(F.mse_loss(pred, noise, reduction="none").mean(dim=-1), reduction)

    def sample(self, feature, generator=None, deterministic=True):
        """Ancestral sampling from pure noise through all steps, clean estimate clipped to [-1, 1]."""
        self.check_inputs(feature)
        if deterministic:
            generator = torch.Generator().manual_seed(DIFFUSION_DECODE_SEED)
        B = feature.shape[0]
        x = torch.randn(B, self.chunk_dim, generator=generator)
        for s in range(self.steps, 0, -1):
            step = torch.full((B,), s, dtype=torch.long)
            eps = self.predict_noise(x, feature, step)
            ab, ab_prev, beta = self.alphas_cumprod[s], self.alphas_cumprod[s - 1], self.betas[s]
            x0 = ((x - (1.0 - ab).sqrt() * eps) / ab.sqrt()).clamp(-1.0, 1.0)
            mean = (ab_prev.sqrt() * beta / (1.0 - ab)) * x0 + ((1.0 - beta).sqrt() * (1.0 - ab_prev) / (1.0 - ab)) * x
            if s > 1:
                var = beta * (1.0 - ab_prev) / (1.0 - ab)
                x = mean + var.sqrt() * torch.randn(B, self.chunk_dim, generator=generator)
            else:
                x = mean
        if not torch.isfinite(x).all():
            raise NumericalError("Diffusion sample is not finite")
        return x
