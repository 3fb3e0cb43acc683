"""Exponential temporal ensembling of overlapping action chunks"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..utils.errors import ContractViolation


@dataclass(frozen=True, eq=False)
class EnsembleBuffer:
    """Past chunk predictions with their ages, oldest first.

    Every retained entry has 0 <= age < chunk_len, so at most chunk_len entries.
    """

    chunk_len: int
    action_dim: int
    m: float = 0.0
    entries: Tuple[Tuple[np.ndarray, int], ...] = ()

    def __post_init__(self):
        if self.chunk_len < 1 or self.action_dim < 1:
            raise ContractViolation(f"Invalid buffer shape H={self.chunk_len}, A={self.action_dim}")
        if self.m < 0:
            raise ContractViolation(f"Smoothing coefficient m must be >= 0, got {self.m}")

    def __len__(self):
        return len(self.entries)


def ensemble_weights(count, m):
    """w_i = exp(-m * i) with i = 0 for the oldest candidate."""
    return np.exp(-float(m) * np.arange(count, dtype=np.float64))


def ensemble_step(buffer, new_chunk):
    """Age the buffer, add a fresh chunk and return the ensembled action for the current step

    Args:
        buffer: EnsembleBuffer
        new_chunk: H*A (or (H, A)) chunk predicted at the current step

    Returns:
        tuple: (A-vector action, updated EnsembleBuffer)
    """
    H, A = buffer.chunk_len, buffer.action_dim
    chunk = np.asarray(new_chunk, dtype=np.float64)
    if chunk.size != H * A:
        raise ContractViolation(f"Chunk must have {H * A} values, got {chunk.size}")
    chunk = chunk.reshape(H, A)

    aged = tuple((c, age + 1) for c, age in buffer.entries if age + 1 < H)
    entries = aged + ((chunk, 0),)
    if not entries:
        raise ContractViolation("Ensemble buffer is empty after eviction")

    candidates = np.stack([c[age] for c, age in entries])
    if len(entries) == 1:
        action = candidates[0]
    else:
        weights = ensemble_weights(len(entries), buffer.m)
        action = (weights[:, None] * candidates).sum(axis=0) / weights.sum()
    return action, EnsembleBuffer(H, A, buffer.m, entries)


def jerk_metric(actions):
    """Mean absolute second difference of an action (or position) sequence."""
    actions = np.asarray(actions, dtype=np.float64)
    if actions.ndim == 1:
        actions = actions[:, None]
    if actions.shape[0] < 3:
        return 0.0
    return float(np.abs(np.diff(actions, n=2, axis=0)).mean())
