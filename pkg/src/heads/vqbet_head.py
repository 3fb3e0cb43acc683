"""VQ-BeT style head: per-stage code classification plus a chunk-space offset"""

import torch

from .base import ActionHead, mlp, reduce
from .focal import focal_loss
from ..utils.errors import ContractViolation


class VQBeTHead(ActionHead):
    """Predicts one code per residual stage and an offset per code combination.

    The tokenizer is frozen: its parameters take no gradient and its
    codebooks are buffers.
    """

    def __init__(self, feature_dim, chunk_dim, hidden, tokenizer, focal_gamma, offset_weight):
        super().__init__(feature_dim, chunk_dim)
        if tokenizer.chunk_dim != chunk_dim:
            raise ContractViolation(f"Tokenizer encodes chunks of {tokenizer.chunk_dim}, head predicts {chunk_dim}")
        self.tokenizer = tokenizer
        self.tokenizer.requires_grad_(False)
        self.layers = tokenizer.layers
        self.codes = tokenizer.codes
        self.focal_gamma = focal_gamma
        self.offset_weight = offset_weight
        self.torso = mlp(feature_dim, hidden, hidden)
        self.code_logits = torch.nn.Linear(hidden, self.layers * self.codes)
        self.offsets = torch.nn.Linear(hidden, (self.codes ** self.layers) * chunk_dim)

    def predict(self, feature):
        hidden = torch.nn.functional.gelu(self.torso(feature))
        logits = self.code_logits(hidden).reshape(feature.shape[0], self.layers, self.codes)
        offsets = self.offsets(hidden).reshape(feature.shape[0], self.codes ** self.layers, self.chunk_dim)
        return logits, offsets

    def flat_index(self, indices):
        """Row-major index of a code tuple into the offset table."""
        flat = torch.zeros(indices.shape[0], dtype=torch.long)
        for l in range(self.layers):
            flat = flat * self.codes + indices[:, l]
        return flat

    def loss(self, feature, target, reduction="mean", generator=None):
        self.check_inputs(feature, target)
        self.tokenizer.require_fitted()
        logits, offsets = self.predict(feature)
        with torch.no_grad():
            indices = self.tokenizer.encode(target)
            decoded = self.tokenizer.decode_indices(indices)
        rows = torch.arange(feature.shape[0])
        code_term = focal_loss(logits, indices, self.focal_gamma, reduction="none").sum(dim=-1)
        offset = offsets[rows, self.flat_index(indices)]
        offset_term = ((offset - (target - decoded)) ** 2).sum(dim=-1)
        return reduce(code_term + self.offset_weight * offset_term, reduction)

    def sample(self, feature, generator=None, deterministic=True):
        self.check_inputs(feature)
        self.tokenizer.require_fitted()
        logits, offsets = self.predict(feature)
        if deterministic:
            indices = logits.argmax(dim=-1)
        else:
            probs = logits.softmax(dim=-1).reshape(-1, self.codes)
            indices = torch.multinomial(probs, 1, generator=generator).reshape(feature.shape[0], self.layers)
        rows = torch.arange(feature.shape[0])
        return self.tokenizer.decode_indices(indices) + offsets[rows, self.flat_index(indices)]
