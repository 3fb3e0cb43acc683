"""Evaluation protocol: seeded closed-loop rollouts per task"""

import math

from .actors import PolicyActor
from .checkpoints import load_policy
from .metrics import MetricsTable
from ..chunker.executor import ensembled_exec, reset_batch
from ..nkernel.rng import derive_seed
from ..utils.log_utils import log_info


def episode_seeds(seed, task_id, rollouts):
    return [derive_seed(seed, "eval", task_id, r) for r in range(rollouts)]


def rollout_task(actor, suite, task_id, rollouts, seed):
    """All rollouts of one task, stepped together; returns EpisodeResults."""
    seeds = episode_seeds(seed, task_id, rollouts)
    states, observations = reset_batch(suite, task_id, seeds)
    return ensembled_exec(actor, states, observations, seeds, actor.chunk_len, actor.ensemble_m)


def evaluate(source, suite, rollouts_per_task=10, seed=0, demos=None, step=0, loss=math.nan,
             deterministic=True, zero_goal=False, verbose=True):
    """Success rate per task over seeded resets

    Args:
        source: Checkpoint path / Checkpoint (loaded and checked against suite) or an actor
        suite: TaskSuite to evaluate on
        rollouts_per_task: Episodes per task
        seed: Evaluation seed (episode seeds derive from it)
        demos: DemoSet for image goal modes
        step, loss: Values recorded in the metrics rows
        deterministic: Argmax / mode-mean decoding
        zero_goal: Zero the conditioning vector (goal ablation)

    Returns:
        MetricsTable: one row per task
    """
    actor = source
    if not hasattr(source, "predict"):
        policy, _, _ = load_policy(source, suite=suite)
        actor = PolicyActor(policy, demos=demos, deterministic=deterministic, zero_goal=zero_goal, seed=seed)

    table = MetricsTable()
    for task in suite.tasks:
        results = rollout_task(actor, suite, task.task_id, rollouts_per_task, seed)
        rate = sum(r.success for r in results) / len(results)
        table.add(step, task.task_id, loss, rate, seed)
        if verbose:
            log_info(f"Task {task.task_id} ({task.instruction}): success {rate:.2f} over {len(results)} rollouts")
    return table
