"""Feature-wise affine conditioning of convolutional feature maps"""

from dataclasses import dataclass

import torch
from torch import nn

from ..utils.errors import ContractViolation


@dataclass
class FilmParams:
    gamma: torch.Tensor    # (..., C) per-channel scale
    beta: torch.Tensor     # (..., C) per-channel shift


def film(x, params):
    """out[c] = gamma[c] * x[c] + beta[c] on a (N, C, H, W) feature map."""
    channels = x.shape[-3]
    if params.gamma.shape[-1] != channels or params.beta.shape[-1] != channels:
        raise ContractViolation(
            f"FiLM params have {params.gamma.shape[-1]}/{params.beta.shape[-1]} channels, feature map has {channels}"
        )
    return params.gamma[..., :, None, None] * x + params.beta[..., :, None, None]


class FilmConditioning(nn.Module):
    """Maps a conditioning vector z to (gamma, beta) = (1 + W_g z + b_g, W_b z + b_b).

    Both maps start at zero, so a freshly built layer is the identity.
    """

    def __init__(self, cond_dim, channels):
        super().__init__()
        self.cond_dim = cond_dim
        self.channels = channels
        self.to_scale = nn.Linear(cond_dim, channels)
        self.to_shift = nn.Linear(cond_dim, channels)
        for layer in (self.to_scale, self.to_shift):
            nn.init.zeros_(layer.weight)
            nn.init.zeros_(layer.bias)

    def params(self, z):
        if z.shape[-1] != self.cond_dim:
            raise ContractViolation(f"Conditioning vector has dim {z.shape[-1]}, FiLM expects {self.cond_dim}")
        return FilmParams(gamma=1.0 + self.to_scale(z), beta=self.to_shift(z))

    def forward(self, x, z):
        return film(x, self.params(z))
