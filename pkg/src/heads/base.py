"""Common interface of all action heads"""

from torch import nn

from ..utils.errors import ContractViolation


def mlp(in_dim, hidden, out_dim):
    """Two-layer MLP torso used by the heads."""
    return nn.Sequential(nn.Linear(in_dim, hidden), nn.GELU(), nn.Linear(hidden, out_dim))


def reduce(per_sample, reduction):
    if reduction == "none":
        return per_sample
    if reduction == "mean":
        return per_sample.mean()
    raise ContractViolation(f"Unknown reduction '{reduction}' (use 'mean' or 'none')")


class ActionHead(nn.Module):
    """Maps an action feature (B, d) to a chunk vector (B, H*A).

    Subclasses implement loss(feature, target, reduction, generator) and
    sample(feature, generator, deterministic).
    """

    def __init__(self, feature_dim, chunk_dim):
        super().__init__()
        self.feature_dim = feature_dim
        self.chunk_dim = chunk_dim

    def check_inputs(self, feature, target=None):
        if feature.dim() != 2 or feature.shape[-1] != self.feature_dim:
            raise ContractViolation(f"Head expects features (B, {self.feature_dim}), got {list(feature.shape)}")
        if target is not None:
            if target.dim() != 2 or target.shape[-1] != self.chunk_dim:
                raise ContractViolation(f"Target chunk must have length {self.chunk_dim}, got {list(target.shape)}")
            if target.shape[0] != feature.shape[0]:
                raise ContractViolation(f"{feature.shape[0]} features for {target.shape[0]} targets")

    def loss(self, feature, target, reduction="mean", generator=None):
        raise NotImplementedError

    def sample(self, feature, generator=None, deterministic=True):
        raise NotImplementedError
