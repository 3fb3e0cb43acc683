"""MLP trunk: all observation tokens of the window concatenated into one vector"""

from torch import nn

from .tokens import TrunkOutput
from ..utils.errors import ContractViolation


class MLPTrunk(nn.Module):
    """Two-layer MLP over h * n * d inputs; one feature, for the final window step."""

    def __init__(self, dim, history, tokens_per_step, hidden):
        super().__init__()
        self.history = history
        self.tokens_per_step = tokens_per_step
        self.in_features = history * tokens_per_step * dim
        self.net = nn.Sequential(nn.Linear(self.in_features, hidden), nn.GELU(), nn.Linear(hidden, dim))

    def forward(self, seq):
        B, h, n, d = seq.tokens.shape
        if h != self.history or n != self.tokens_per_step:
            raise ContractViolation(
                f"MLP trunk built for h={self.history}, n={self.tokens_per_step}; got h={h}, n={n}"
            )
        feature = self.net(seq.tokens.reshape(B, h * n * d))
        return TrunkOutput(features=feature[:, None, :], step_index=(h - 1,))
