"""Modality encoders projecting views, proprio and goals to a common token dimension"""

from dataclasses import dataclass

import torch
from torch import nn

from .vision import VisionEncoder
from ..config.config import PROPRIO_DIM
from ..utils.errors import ContractViolation, TaskLookupError


@dataclass
class EncodedToken:
    vector: torch.Tensor    # (..., d)
    tag: str                # view name, 'proprio' or 'goal'


class ProprioEncoder(nn.Module):
    """Two-layer MLP 4 -> d -> d."""

    def __init__(self, out_dim):
        super().__init__()
        self.net = nn.Sequential(nn.Linear(PROPRIO_DIM, out_dim), nn.SiLU(), nn.Linear(out_dim, out_dim))
        nn.init.zeros_(self.net[2].bias)

    def forward(self, state):
        if state.shape[-1] != PROPRIO_DIM:
            raise ContractViolation(f"Proprio must have {PROPRIO_DIM} entries, got shape {list(state.shape)}")
        return self.net(state)


class ModalityEncoders(nn.Module):
    """All sensory and conditioning encoders of a policy.

    One vision encoder is shared by all views unless separate_encoders is set.
    The goal image path reuses the (first view's) vision encoder without FiLM.
    """

    def __init__(self, views, image_size, num_tasks, hidden_dim, cond_dim, vision_channels, separate_encoders=False):
        super().__init__()
        self.views = tuple(views)
        self.hidden_dim = hidden_dim
        self.cond_dim = cond_dim
        self.num_tasks = num_tasks
        self.separate_encoders = separate_encoders
        if separate_encoders:
            self.vision = nn.ModuleDict(
                {v: VisionEncoder(image_size, vision_channels, hidden_dim, cond_dim) for v in self.views}
            )
        else:
            self.vision = VisionEncoder(image_size, vision_channels, hidden_dim, cond_dim)
        self.proprio = ProprioEncoder(hidden_dim)
        self.task_table = nn.Embedding(num_tasks, cond_dim)
        self.goal_proj = nn.Linear(hidden_dim, cond_dim)
        self.goal_token = nn.Linear(cond_dim, hidden_dim)

    def vision_for(self, view):
        if self.separate_encoders:
            if view not in self.vision:
                raise ContractViolation(f"No encoder for view '{view}' (views: {list(self.views)})")
            return self.vision[view]
        return self.vision

    def encode_image(self, images, z=None, view=None):
        """Image token; z=None runs the encoder unconditionally."""
        view = view or self.views[0]
        return EncodedToken(self.vision_for(view)(images, z), view)

    def encode_proprio(self, state):
        return EncodedToken(self.proprio(state), "proprio")

    def encode_task(self, task_ids):
        """Conditioning vectors z for task ids (row lookup)."""
        task_ids = torch.as_tensor(task_ids, dtype=torch.long)
        if task_ids.numel() and (int(task_ids.min()) < 0 or int(task_ids.max()) >= self.num_tasks):
            raise TaskLookupError(f"Task ids {task_ids.tolist()} outside the embedding table of size {self.num_tasks}")
        return self.task_table(task_ids)

    def encode_goal_image(self, images):
        """Conditioning vectors z from goal images via the unconditional vision path."""
        return self.goal_proj(self.vision_for(self.views[0])(images, None))

    def encode_goal_token(self, z):
        return EncodedToken(self.goal_token(z), "goal")
