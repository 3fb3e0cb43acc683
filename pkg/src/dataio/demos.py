"""Expert demonstrations: trajectory records and seeded generation"""

from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from ..config.config import ACTION_DIM, DEFAULT_MAX_RETRIES, PROPRIO_DIM
from ..envsuite.env import reset, step
from ..envsuite.expert import expert_action
from ..envsuite.tasks import suite_hash
from ..nkernel.rng import derive_seed, make_stream
from ..utils.errors import ContractViolation, GenerationError
from ..utils.log_utils import log_info


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    """One expert episode; every sequence has the same length L."""

    task_id: int
    views: Dict[str, np.ndarray]     # view name -> (L, G, G, 3) float32
    proprio: np.ndarray              # (L, 4) float32
    actions: np.ndarray              # (L, A) float32, within [-1, 1]

    def __post_init__(self):
        L = self.proprio.shape[0]
        if self.proprio.shape != (L, PROPRIO_DIM):
            raise ContractViolation(f"proprio must be (L, {PROPRIO_DIM}), got {self.proprio.shape}")
        if self.actions.ndim != 2 or self.actions.shape[0] != L:
            raise ContractViolation(f"actions must be (L, A) with L={L}, got {self.actions.shape}")
        for name, frames in self.views.items():
            if frames.ndim != 4 or frames.shape[0] != L or frames.shape[-1] != 3:
                raise ContractViolation(f"view '{name}' must be (L, G, G, 3) with L={L}, got {frames.shape}")
        if self.actions.size and float(np.abs(self.actions).max()) > 1.0:
            raise ContractViolation("actions must lie within [-1, 1]")

    @property
    def length(self):
        return self.proprio.shape[0]

    def equals(self, other):
        """Bit-exact equality (used to verify file roundtrips)."""
        return (
            self.task_id == other.task_id
            and list(self.views) == list(other.views)
            and all(np.array_equal(self.views[v], other.views[v]) for v in self.views)
            and np.array_equal(self.proprio, other.proprio)
            and np.array_equal(self.actions, other.actions)
        )


@dataclass(frozen=True, eq=False)
class DemoSet:
    """Immutable collection of records plus the metadata written to the file header."""

    records: Tuple[TrajectoryRecord, ...]
    metadata: Dict[str, object] = field(default_factory=dict)

    def __len__(self):
        return len(self.records)

    @property
    def view_names(self):
        return tuple(self.metadata.get("view_names", ()))

    @property
    def action_dim(self):
        return int(self.metadata.get("action_dim", ACTION_DIM))

    def by_task(self):
        """task_id -> list of record indices."""
        index = {}
        for i, record in enumerate(self.records):
            index.setdefault(record.task_id, []).append(i)
        return index

    def equals(self, other):
        return (
            self.metadata == other.metadata
            and len(self.records) == len(other.records)
            and all(a.equals(b) for a, b in zip(self.records, other.records))
        )


def demo_metadata(suite):
    return {
        "suite_hash": suite_hash(suite),
        "image_size": suite.image_size,
        "view_names": list(suite.views),
        "action_dim": ACTION_DIM,
    }


def rollout_expert(task, seed, image_size, views, noise_std=0.0, bimodal=False):
    """Roll the scripted expert once.

    The terminal observation is kept and paired with a zero action, so the
    last proprio is the success state.

    Returns:
        tuple: (TrajectoryRecord, success)
    """
    state, obs = reset(task, seed, image_size, views, bimodal=bimodal)
    noise_rng = make_stream(seed, "expert_noise", task.task_id)
    frames = {v: [obs.views[v]] for v in views}
    proprio, actions = [obs.proprio], []
    success = False
    done = False
    while not done:
        action = expert_action(state, noise_std=noise_std, rng=noise_rng)
        state, obs, success, done = step(state, action)
        actions.append(action.astype(np.float32))
        for v in views:
            frames[v].append(obs.views[v])
        proprio.append(obs.proprio)
    actions.append(np.zeros(ACTION_DIM, dtype=np.float32))
    record = TrajectoryRecord(
        task_id=task.task_id,
        views={v: np.stack(frames[v]).astype(np.float32) for v in views},
        proprio=np.stack(proprio).astype(np.float32),
        actions=np.stack(actions).astype(np.float32),
    )
    return record, success


def generate_demos(suite, per_task, seed, noise_std=0.0, bimodal=False, max_retries=DEFAULT_MAX_RETRIES):
    """Roll scripted experts to success for every task

    Args:
        suite: TaskSuite
        per_task: Successful episodes per task (>= 1)
        seed: Base seed; the result is deterministic given it
        noise_std: Gaussian expert action noise
        bimodal: Random push orbit direction per episode
        max_retries: Failed episodes re-sampled per demonstration before giving up

    Returns:
        DemoSet: len(suite) * per_task records, grouped by task
    """
    if per_task < 1:
        raise ContractViolation(f"per_task must be >= 1, got {per_task}")
    records = []
    for task in suite.tasks:
        for index in range(per_task):
            for attempt in range(max_retries + 1):
                episode_seed = derive_seed(seed, "demo", task.task_id, index, attempt)
                record, success = rollout_expert(task, episode_seed, suite.image_size, suite.views, noise_std, bimodal)
                if success:
                    records.append(record)
                    break
            else:
                raise GenerationError(
                    f"Expert failed task {task.task_id} ('{task.instruction}') {max_retries + 1} times in a row"
                )
    log_info(f"Generated {len(records)} demonstrations over {len(suite)} tasks")
    return DemoSet(tuple(records), demo_metadata(suite))


def chunk_targets(record, chunk_len):
    """All chunk targets of a record: row t = [a_t, ..., a_{t+H-1}] with repeat-last padding."""
    L = record.length
    idx = np.minimum(np.arange(L)[:, None] + np.arange(chunk_len)[None, :], L - 1)
    return record.actions[idx].reshape(L, -1)


def all_chunk_targets(demos, chunk_len):
    """Stacked chunk targets of every record (tokenizer fitting input)."""
    if not demos.records:
        return np.zeros((0, chunk_len * demos.action_dim), dtype=np.float32)
    return np.concatenate([chunk_targets(r, chunk_len) for r in demos.records]).astype(np.float32)


def records_for_task(demos, task_id) -> List[TrajectoryRecord]:
    return [r for r in demos.records if r.task_id == task_id]
