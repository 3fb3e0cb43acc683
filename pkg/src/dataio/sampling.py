"""Training batch sampling: observation windows, chunk targets, goal payloads"""

from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from ..config.config import GOAL_MODES
from ..utils.errors import ConfigError, ContractViolation


@dataclass(frozen=True)
class SamplingConfig:
    batch_size: int
    history: int
    chunk_len: int
    goal_mode: str = "text"
    k_goal: int = 1

    @classmethod
    def from_policy(cls, policy_config):
        return cls(
            batch_size=policy_config.batch_size,
            history=policy_config.history,
            chunk_len=policy_config.effective_chunk_len,
            goal_mode=policy_config.goal_mode,
            k_goal=policy_config.k_goal,
        )


@dataclass(frozen=True, eq=False)
class SampleBatch:
    """B training items; arrays are indexed [item, window step, ...]."""

    views: Dict[str, np.ndarray]         # view -> (B, h, G, G, 3)
    proprio: np.ndarray                  # (B, h, 4)
    targets: np.ndarray                  # (B, h, H*A)
    valid: np.ndarray                    # (B, h) bool
    task_ids: np.ndarray                 # (B,) int64
    goal_kind: str                       # one of GOAL_MODES, uniform within the batch
    goal_images: Optional[np.ndarray]    # (B, h, G, G, 3) for image goal modes, else None
    record_index: np.ndarray             # (B,) sampled record per item
    time_index: np.ndarray               # (B,) sampled t per item

    @property
    def batch_size(self):
        return self.proprio.shape[0]


def sample_batch(demos, cfg, rng, chunk_dim=None):
    """Sample a training batch

    Items are drawn uniformly over all (record, t) pairs. The window covers
    t-h+1..t; steps before 0 are masked invalid and padded with step 0.
    The chunk target at window step s is a_s..a_{s+H-1}, indices past L-1
    repeat the final action.

    Args:
        demos: DemoSet
        cfg: SamplingConfig (B, h, H, goal_mode, k_goal)
        rng: numpy Generator (caller-owned stream)
        chunk_dim: Expected H*A of the configured head (checked when given)

    Returns:
        SampleBatch
    """
    if cfg.history < 1 or cfg.chunk_len < 1:
        raise ContractViolation(f"history and chunk_len must be >= 1, got h={cfg.history}, H={cfg.chunk_len}")
    if cfg.goal_mode not in GOAL_MODES:
        raise ConfigError(f"goal_mode must be one of {list(GOAL_MODES)}, got {cfg.goal_mode!r}")
    if cfg.goal_mode == "intermediate" and cfg.k_goal < 1:
        raise ContractViolation(f"k_goal must be >= 1 for intermediate goals, got {cfg.k_goal}")
    action_dim = demos.action_dim
    if chunk_dim is not None and chunk_dim != cfg.chunk_len * action_dim:
        raise ConfigError(
            f"Head expects chunk size {chunk_dim} but H*A = {cfg.chunk_len}*{action_dim} = {cfg.chunk_len * action_dim}"
        )
    if not demos.records:
        raise ContractViolation("Cannot sample from an empty DemoSet")

    lengths = np.array([r.length for r in demos.records])
    offsets = np.concatenate([[0], np.cumsum(lengths)])
    flat = rng.integers(0, offsets[-1], size=cfg.batch_size)
    record_index = np.searchsorted(offsets, flat, side="right") - 1
    time_index = flat - offsets[record_index]

    by_task = demos.by_task()
    h, H = cfg.history, cfg.chunk_len
    window = np.arange(-h + 1, 1)
    view_names = list(demos.records[0].views)

    views = {v: [] for v in view_names}
    proprio, targets, valid, task_ids, goals = [], [], [], [], []
    for r_idx, t in zip(record_index, time_index):
        record = demos.records[r_idx]
        L = record.length
        steps = t + window
        mask = steps >= 0
        steps = np.where(mask, steps, 0)
        for v in view_names:
            views[v].append(record.views[v][steps])
        proprio.append(record.proprio[steps])
        chunk_idx = np.minimum(steps[:, None] + np.arange(H)[None, :], L - 1)
        targets.append(record.actions[chunk_idx].reshape(h, H * action_dim))
        valid.append(mask)
        task_ids.append(record.task_id)

        if cfg.goal_mode != "text":
            # A different demo of the same task, so the goal never leaks the current episode
            candidates = [i for i in by_task[record.task_id] if i != r_idx] or [r_idx]
            partner = demos.records[candidates[int(rng.integers(len(candidates)))]]
            scene = partner.views[view_names[0]]
            if cfg.goal_mode == "goal_image":
                goals.append(np.repeat(scene[-1][None], h, axis=0))
            else:
                frames = np.minimum(steps + cfg.k_goal, partner.length - 1)
                goals.append(scene[frames])

    return SampleBatch(
        views={v: np.stack(frames).astype(np.float32) for v, frames in views.items()},
        proprio=np.stack(proprio).astype(np.float32),
        targets=np.stack(targets).astype(np.float32),
        valid=np.stack(valid),
        task_ids=np.asarray(task_ids, dtype=np.int64),
        goal_kind=cfg.goal_mode,
        goal_images=np.stack(goals).astype(np.float32) if goals else None,
        record_index=record_index,
        time_index=time_index,
    )
