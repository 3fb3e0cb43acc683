"""Diagonal Gaussian mixture head"""

import math

import torch
import torch.nn.functional as F

from .base import ActionHead, mlp, reduce
from ..config.config import GMM_MIN_SCALE
from ..utils.errors import NumericalError


def gmm_nll(logits, means, scales, target):
    """Negative log-likelihood of target under a diagonal mixture.

    Args:
        logits: (B, M) mixture logits
        means: (B, M, D)
        scales: (B, M, D) standard deviations > 0
        target: (B, D)

    Returns:
        torch.Tensor: (B,) per-sample NLL
    """
    diff = (target[:, None, :] - means) / scales
    log_normal = -0.5 * diff ** 2 - torch.log(scales) - 0.5 * math.log(2 * math.pi)
    log_mix = F.log_softmax(logits, dim=-1) + log_normal.sum(dim=-1)
    return -torch.logsumexp(log_mix, dim=-1)


class GMMHead(ActionHead):
    """M modes, each with a mean chunk and per-dimension softplus scales."""

    def __init__(self, feature_dim, chunk_dim, hidden, modes):
        super().__init__(feature_dim, chunk_dim)
        self.modes = modes
        self.net = mlp(feature_dim, hidden, modes * (1 + 2 * chunk_dim))

    def mixture(self, feature):
        out = self.net(feature)
        B, M, D = feature.shape[0], self.modes, self.chunk_dim
        logits = out[:, :M]
        means = out[:, M:M + M * D].reshape(B, M, D)
        scales = F.softplus(out[:, M + M * D:].reshape(B, M, D)) + GMM_MIN_SCALE
        return logits, means, scales

    def loss(self, feature, target, reduction="mean", generator=None):
        self.check_inputs(feature, target)
        nll = gmm_nll(*self.mixture(feature), target)
        if not torch.isfinite(nll).all():
            raise NumericalError("GMM negative log-likelihood is not finite")
        return reduce(nll, reduction)

    def sample(self, feature, generator=None, deterministic=True):
        self.check_inputs(feature)
        logits, means, scales = self.mixture(feature)
        rows = torch.arange(feature.shape[0])
        if deterministic:
            return means[rows, logits.argmax(dim=-1)]
        mode = torch.multinomial(logits.softmax(dim=-1), 1, generator=generator).squeeze(-1)
        noise = torch.randn(means.shape[0], self.chunk_dim, generator=generator)
        return means[rows, mode] + scales[rows, mode] * noise
