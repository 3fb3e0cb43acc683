"""Behavior-transformer style head: k-means bin classification plus per-bin offsets"""

import torch

from .base import ActionHead, mlp, reduce
from .focal import focal_loss
from ..utils.errors import ContractViolation, StateError


class BeTHead(ActionHead):
    """Focal loss on the nearest-centroid bin, L2 on the offset at the true bin only."""

    def __init__(self, feature_dim, chunk_dim, hidden, num_clusters, focal_gamma, offset_weight):
        super().__init__(feature_dim, chunk_dim)
        self.num_clusters = num_clusters
        self.focal_gamma = focal_gamma
        self.offset_weight = offset_weight
        self.torso = mlp(feature_dim, hidden, hidden)
        self.bin_logits = torch.nn.Linear(hidden, num_clusters)
        self.offsets = torch.nn.Linear(hidden, num_clusters * chunk_dim)
        self.register_buffer("centroids", torch.zeros(num_clusters, chunk_dim))
        self.register_buffer("fitted", torch.tensor(False))

    def load_codebook(self, codebook):
        centroids = torch.as_tensor(codebook.centroids, dtype=torch.float32)
        if centroids.shape != self.centroids.shape:
            raise ContractViolation(
                f"Codebook of shape {list(centroids.shape)} does not fit head expecting {list(self.centroids.shape)}"
            )
        self.centroids.copy_(centroids)
        self.fitted.fill_(True)

    def _require_fitted(self):
        if not bool(self.fitted):
            raise StateError("BeT head used before its k-means codebook was loaded (run fit-tokenizer)")

    def predict(self, feature):
        hidden = torch.nn.functional.gelu(self.torso(feature))
        offsets = self.offsets(hidden).reshape(feature.shape[0], self.num_clusters, self.chunk_dim)
        return self.bin_logits(hidden), offsets

    def nearest_bin(self, target):
        return torch.cdist(target, self.centroids).argmin(dim=-1)

    def loss(self, feature, target, reduction="mean", generator=None):
        self.check_inputs(feature, target)
        self._require_fitted()
        logits, offsets = self.predict(feature)
        bins = self.nearest_bin(target)
        rows = torch.arange(feature.shape[0])
        residual = target - self.centroids[bins]
        offset_term = ((offsets[rows, bins] - residual) ** 2).sum(dim=-1)
        per_sample = focal_loss(logits, bins, self.focal_gamma, reduction="none") + self.offset_weight * offset_term
        return reduce(per_sample, reduction)

    def sample(self, feature, generator=None, deterministic=True):
        self.check_inputs(feature)
        self._require_fitted()
        logits, offsets = self.predict(feature)
        if deterministic:
            bins = logits.argmax(dim=-1)
        else:
            bins = torch.multinomial(logits.softmax(dim=-1), 1, generator=generator).squeeze(-1)
        rows = torch.arange(feature.shape[0])
        return self.centroids[bins] + offsets[rows, bins]
