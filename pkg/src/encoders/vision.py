"""Small FiLM-conditioned convolutional image encoder"""

import torch.nn.functional as F
from torch import nn

from .film import FilmConditioning
from ..utils.errors import ContractViolation


class ConvBlock(nn.Module):
    """conv3x3 -> GroupNorm -> SiLU -> 2x average pool -> FiLM."""

    def __init__(self, in_channels, out_channels, cond_dim):
        super().__init__()
        self.conv = nn.Conv2d(in_channels, out_channels, kernel_size=3, padding=1)
        self.norm = nn.GroupNorm(min(4, out_channels), out_channels)
        self.film = FilmConditioning(cond_dim, out_channels)

    def forward(self, x, z=None):
        x = F.avg_pool2d(F.silu(self.norm(self.conv(x))), 2)
        if z is not None:
            x = self.film(x, z)
        return x


class VisionEncoder(nn.Module):
    """Encodes (N, G, G, 3) images in [0, 1] to (N, d) vectors.

    With z given, every block output is FiLM-modulated by z; z=None bypasses
    the FiLM layers (unconditional encoder).
    """

    def __init__(self, image_size, channels, out_dim, cond_dim):
        super().__init__()
        self.image_size = image_size
        widths = [3] + list(channels)
        self.blocks = nn.ModuleList(
            ConvBlock(c_in, c_out, cond_dim) for c_in, c_out in zip(widths[:-1], widths[1:])
        )
        self.proj = nn.Linear(widths[-1], out_dim)

    def forward(self, images, z=None):
        if images.shape[-3:] != (self.image_size, self.image_size, 3):
            raise ContractViolation(
                f"Expected images of shape (..., {self.image_size}, {self.image_size}, 3), got {list(images.shape)}"
            )
        lead = images.shape[:-3]
        x = images.reshape(-1, self.image_size, self.image_size, 3).permute(0, 3, 1, 2)
        if z is not None:
            z = z.reshape(-1, z.shape[-1])
            if z.shape[0] != x.shape[0]:
                raise ContractViolation(f"{z.shape[0]} conditioning vectors for {x.shape[0]} images")
        for block in self.blocks:
            x = block(x, z)
        x = x.mean(dim=(-2, -1))
        return self.proj(x).reshape(*lead, -1)
