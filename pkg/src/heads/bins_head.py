"""Uniform per-dimension discretisation head"""

import torch
import torch.nn.functional as F

from .base import ActionHead, mlp, reduce
from ..utils.log_utils import log_warning


def bin_index(values, num_bins):
    """Bin of each value in [-1, 1] (values are expected to be clamped already)."""
    idx = torch.floor((values + 1.0) / 2.0 * num_bins).long()
    return idx.clamp(0, num_bins - 1)


def bin_centers(num_bins):
    return -1.0 + (torch.arange(num_bins, dtype=torch.float32) + 0.5) * (2.0 / num_bins)


class BinsHead(ActionHead):
    """H*A independent categorical distributions over uniform bins of [-1, 1].

    Targets outside the range are clamped; clamped_count counts them.
    """

    def __init__(self, feature_dim, chunk_dim, hidden, num_bins):
        super().__init__(feature_dim, chunk_dim)
        self.num_bins = num_bins
        self.net = mlp(feature_dim, hidden, chunk_dim * num_bins)
        self.register_buffer("centers", bin_centers(num_bins), persistent=False)
        self.clamped_count = 0

    def logits(self, feature):
        return self.net(feature).reshape(feature.shape[0], self.chunk_dim, self.num_bins)

    def clamp_targets(self, target):
        outside = int(((target < -1.0) | (target > 1.0)).sum())
        if outside:
            if self.clamped_count == 0:
                log_warning(f"Clamping {outside} bin-head target values outside [-1, 1]")
            self.clamped_count += outside
        return target.clamp(-1.0, 1.0)

    def loss(self, feature, target, reduction="mean", generator=None):
        self.check_inputs(feature, target)
        classes = bin_index(self.clamp_targets(target), self.num_bins)
        logits = self.logits(feature)
        per_dim = F.cross_entropy(logits.reshape(-1, self.num_bins), classes.reshape(-1), reduction="none")
        return reduce(per_dim.reshape(classes.shape).mean(dim=-1), reduction)

    def sample(self, feature, generator=None, deterministic=True):
        self.check_inputs(feature)
        logits = self.logits(feature)
        if deterministic:
            idx = logits.argmax(dim=-1)
        else:
            probs = logits.softmax(dim=-1).reshape(-1, self.num_bins)
            idx = torch.multinomial(probs, 1, generator=generator).reshape(logits.shape[:-1])
        return self.centers[idx]
