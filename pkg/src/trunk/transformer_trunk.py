"""Decoder-only transformer trunk with one learnable action token per timestep"""

import torch
from torch import nn

from .tokens import TrunkOutput, build_mask
from ..nkernel.attention import causal_attention
from ..utils.errors import ContractViolation


class SelfAttention(nn.Module):
    def __init__(self, dim, heads):
        super().__init__()
        if dim % heads != 0:
            raise ContractViolation(f"Model dim {dim} is not divisible by {heads} attention heads")
        # query, key, value projections for all heads in one matmul
        self.qkv = nn.Linear(dim, 3 * dim)
        self.proj = nn.Linear(dim, dim)
        self.heads = heads
        self.dim = dim

    def forward(self, x, mask):
        B, T, C = x.size()
        q, k, v = self.qkv(x).split(self.dim, dim=2)
        q = q.view(B, T, self.heads, C // self.heads).transpose(1, 2)  # (B, nh, T, hs)
        k = k.view(B, T, self.heads, C // self.heads).transpose(1, 2)
        v = v.view(B, T, self.heads, C // self.heads).transpose(1, 2)
        y = causal_attention(q, k, v, mask)
        y = y.transpose(1, 2).contiguous().view(B, T, C)
        return self.proj(y)


class Block(nn.Module):
    """Pre-LN block: x + attn(ln(x)), then x + mlp(ln(x))."""

    def __init__(self, dim, heads):
        super().__init__()
        self.ln_1 = nn.LayerNorm(dim)
        self.attn = SelfAttention(dim, heads)
        self.ln_2 = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(nn.Linear(dim, 4 * dim), nn.GELU(), nn.Linear(4 * dim, dim))

    def forward(self, x, mask):
        x = x + self.attn(self.ln_1(x), mask)
        x = x + self.mlp(self.ln_2(x))
        return x


class TransformerTrunk(nn.Module):
    """Interleaves observation tokens with action tokens and returns one feature per timestep.

    trunk_input='concatenated' first fuses all observation tokens of a timestep
    into a single token with a linear map.
    """

    def __init__(self, dim, layers, heads, max_history, tokens_per_step, trunk_input="separate"):
        super().__init__()
        self.dim = dim
        self.max_history = max_history
        self.tokens_per_step = tokens_per_step
        self.trunk_input = trunk_input
        if trunk_input == "concatenated":
            self.input_proj = nn.Linear(tokens_per_step * dim, dim)
        self.action_token = nn.Parameter(torch.randn(dim) * 0.02)
        self.pos_emb = nn.Parameter(torch.randn(max_history, dim) * 0.02)
        self.blocks = nn.ModuleList(Block(dim, heads) for _ in range(layers))
        self.ln_f = nn.LayerNorm(dim)

    def forward(self, seq, action_tokens=None, return_hidden=False):
        """
        Args:
            seq: TokenSequence with tokens (B, h, n, d)
            action_tokens: Optional (h, d) or (B, h, d) replacement for the learned action tokens
            return_hidden: Also return the final hidden states (B, h, n' + 1, d)

        Returns:
            TrunkOutput (and hidden states when requested)
        """
        tokens = seq.tokens
        if tokens.dim() != 4 or tokens.shape[1] == 0 or tokens.shape[2] == 0:
            raise ContractViolation(f"Empty or malformed token sequence of shape {list(tokens.shape)}")
        B, h, n, d = tokens.shape
        if h > self.max_history:
            raise ContractViolation(f"History {h} exceeds the trunk's positional table ({self.max_history})")
        if n != self.tokens_per_step:
            raise ContractViolation(f"Expected {self.tokens_per_step} tokens per timestep, got {n}")
        if self.trunk_input == "concatenated":
            tokens = self.input_proj(tokens.reshape(B, h, 1, n * d))
            n = 1

        if action_tokens is None:
            act = self.action_token.expand(B, h, 1, d)
        else:
            act = action_tokens.expand(B, h, d).unsqueeze(2)
        x = torch.cat([tokens, act], dim=2) + self.pos_emb[:h][None, :, None, :]
        x = x.reshape(B, h * (n + 1), d)
        mask = build_mask(h, n)
        for block in self.blocks:
            x = block(x, mask)
        x = self.ln_f(x).reshape(B, h, n + 1, d)
        out = TrunkOutput(features=x[:, :, -1], step_index=tuple(range(h)))
        if return_hidden:
            return out, x
        return out
