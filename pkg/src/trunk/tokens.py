"""Token sequences over a history window and the trunk attention mask"""

from dataclasses import dataclass
from typing import Tuple

import torch

from ..utils.errors import ContractViolation


@dataclass
class TokenSequence:
    """Observation tokens of h timesteps, fixed order per step (views, proprio, goal).

    The learnable action token of each step is appended by the trunk itself.
    """

    tokens: torch.Tensor      # (B, h, n, d)
    tags: Tuple[str, ...]     # n tags, one per slot within a timestep

    @classmethod
    def from_encoded(cls, encoded):
        """Stack EncodedTokens whose vectors are (B, h, d)."""
        if not encoded:
            raise ContractViolation("A token sequence needs at least one token per timestep")
        shapes = {tuple(t.vector.shape) for t in encoded}
        if len(shapes) != 1:
            raise ContractViolation(f"All tokens must share shape (B, h, d), got {sorted(shapes)}")
        return cls(torch.stack([t.vector for t in encoded], dim=2), tuple(t.tag for t in encoded))

    @property
    def history(self):
        return self.tokens.shape[1]

    @property
    def tokens_per_step(self):
        return self.tokens.shape[2]

    def timestep_of(self):
        """Timestep index of each slot of the flattened sequence (including action tokens)."""
        return torch.arange(self.history).repeat_interleave(self.tokens_per_step + 1)


@dataclass
class TrunkOutput:
    features: torch.Tensor        # (B, n_out, d)
    step_index: Tuple[int, ...]   # window step each feature belongs to


def build_mask(history, tokens_per_step):
    """Attention mask over h * (n + 1) positions, action token last in each timestep.

    mask[i, j] is True when i may attend to j:
      (a) timestep(j) <= timestep(i)
      (b) action tokens are keys only for themselves
    """
    if history < 1 or tokens_per_step < 1:
        raise ContractViolation(f"Empty token sequence (h={history}, n={tokens_per_step})")
    per_step = tokens_per_step + 1
    positions = torch.arange(history * per_step)
    step = positions // per_step
    is_action = (positions % per_step) == tokens_per_step
    causal = step[None, :] <= step[:, None]
    key_allowed = ~is_action[None, :] | (positions[:, None] == positions[None, :])
    return causal & key_allowed
