"""Focal loss for the discrete heads"""

import torch.nn.functional as F

from .base import reduce


def focal_loss(logits, target, gamma, reduction="mean"):
    """-(1 - p_t)^gamma * log p_t over the last axis of logits.

    gamma=0 is plain cross-entropy.

    Args:
        logits: (..., K) unnormalised scores
        target: (...) integer class indices
        gamma: Focusing exponent >= 0
        reduction: 'mean' or 'none'
    """
    log_p = F.log_softmax(logits, dim=-1)
    log_pt = log_p.gather(-1, target.long().unsqueeze(-1)).squeeze(-1)
    if gamma == 0:
        per_item = -log_pt
    else:
        per_item = -((1.0 - log_pt.exp()) ** gamma) * log_pt
    return reduce(per_item, reduction)
