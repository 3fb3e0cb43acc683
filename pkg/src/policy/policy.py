"""Multi-task chunking policy: encoders -> trunk -> action head"""

import numpy as np
import torch
from torch import nn

from ..config.config import ACTION_DIM
from ..encoders.modality import ModalityEncoders
from ..heads.factory import build_head
from ..nkernel.rng import seeded_init
from ..runtime.losses import multi_step_loss
from ..trunk.mlp_trunk import MLPTrunk
from ..trunk.tokens import TokenSequence
from ..trunk.transformer_trunk import TransformerTrunk
from ..utils.errors import ConfigError, ContractViolation


def _tensor(array, dtype=torch.float32):
    if isinstance(array, torch.Tensor):
        return array.to(dtype)
    return torch.as_tensor(np.asarray(array), dtype=dtype)


class ChunkPolicy(nn.Module):
    """Predicts an H-step action chunk from an observation window and a goal.

    The conditioning vector z (task embedding or encoded goal image) drives
    FiLM in the vision encoder; a goal token is added to the trunk input when
    goal_mode != 'text' or FiLM is off.
    """

    def __init__(self, config, views, image_size, num_tasks, tokenizer=None):
        super().__init__()
        self.config = config = config.resolved()
        self.views = tuple(views)
        self.image_size = image_size
        self.num_tasks = num_tasks
        self.chunk_len = config.effective_chunk_len
        self.chunk_dim = config.chunk_dim(ACTION_DIM)
        self.tokens_per_step = len(self.views) + 1 + int(config.includes_goal_token)
        with seeded_init(config.seed, "policy"):
            self.encoders = ModalityEncoders(
                self.views, image_size, num_tasks, config.hidden_dim, config.cond_dim,
                config.vision_channels, config.separate_encoders,
            )
            if config.trunk == "transformer":
                self.trunk = TransformerTrunk(
                    config.hidden_dim, config.layers, config.attn_heads, config.history,
                    self.tokens_per_step, config.trunk_input,
                )
            elif config.trunk == "mlp":
                self.trunk = MLPTrunk(config.hidden_dim, config.history, self.tokens_per_step, config.mlp_trunk_hidden)
            else:
                raise ConfigError(f"Unknown trunk '{config.trunk}'")
            self.head = build_head(config, config.hidden_dim, self.chunk_dim, tokenizer)

    def conditioning(self, task_ids, goal_images, history, zero_goal=False):
        """z of shape (B, h, d_z)."""
        if self.config.goal_mode == "text":
            z = self.encoders.encode_task(_tensor(task_ids, torch.long))
            z = z[:, None, :].expand(-1, history, -1)
        else:
            if goal_images is None:
                raise ContractViolation(f"goal_mode '{self.config.goal_mode}' needs goal images")
            z = self.encoders.encode_goal_image(_tensor(goal_images))
        if self.config.zero_goal or zero_goal:
            z = z * 0.0
        return z

    def tokens(self, views, proprio, z):
        """TokenSequence for a window: views (B, h, G, G, 3) per view name, proprio (B, h, 4)."""
        film_z = z if self.config.use_film else None
        encoded = [self.encoders.encode_image(_tensor(views[v]), film_z, v) for v in self.views]
        encoded.append(self.encoders.encode_proprio(_tensor(proprio)))
        if self.config.includes_goal_token:
            encoded.append(self.encoders.encode_goal_token(z))
        return TokenSequence.from_encoded(encoded)

    def features(self, views, proprio, task_ids, goal_images=None, zero_goal=False):
        history = _tensor(proprio).shape[1]
        z = self.conditioning(task_ids, goal_images, history, zero_goal)
        return self.trunk(self.tokens(views, proprio, z))

    def loss(self, batch, generator=None):
        """Training loss of a SampleBatch."""
        trunk_out = self.features(batch.views, batch.proprio, batch.task_ids, batch.goal_images)
        return multi_step_loss(
            trunk_out,
            _tensor(batch.targets),
            _tensor(batch.valid, torch.bool),
            self.head,
            last_step_only=self.config.last_step_only,
            generator=generator,
        )

    def predict_chunk(self, views, proprio, task_ids, goal_images=None, generator=None, deterministic=True,
                      zero_goal=False):
        """Chunk (B, H*A) predicted from the final step of each window."""
        with torch.no_grad():
            trunk_out = self.features(views, proprio, task_ids, goal_images, zero_goal)
            return self.head.sample(trunk_out.features[:, -1], generator=generator, deterministic=deterministic)

    def count_parameters(self):
        def count(module):
            return sum(p.numel() for p in module.parameters() if p.requires_grad)

        report = {"encoders": count(self.encoders), "trunk": count(self.trunk), "head": count(self.head)}
        report["total"] = sum(report.values())
        return report
