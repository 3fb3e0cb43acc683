"""Deterministic regression head"""

from .base import ActionHead, mlp, reduce


class MLPHead(ActionHead):
    """Two-layer MLP trained with mean squared error."""

    def __init__(self, feature_dim, chunk_dim, hidden):
        super().__init__(feature_dim, chunk_dim)
        self.net = mlp(feature_dim, hidden, chunk_dim)

    def forward(self, feature):
        return self.net(feature)

    def loss(self, feature, target, reduction="mean", generator=None):
        self.check_inputs(feature, target)
        per_sample = ((self.net(feature) - target) ** 2).mean(dim=-1)
        return reduce(per_sample, reduction)

    def sample(self, feature, generator=None, deterministic=True):
        self.check_inputs(feature)
        return self.net(feature)
