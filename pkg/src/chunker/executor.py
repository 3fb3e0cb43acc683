"""Closed-loop chunk execution over a batch of environments"""

from dataclasses import dataclass

import numpy as np

from .ensemble import EnsembleBuffer, ensemble_step
from ..config.config import ACTION_DIM
from ..envsuite import env as envlib
from ..utils.errors import ContractViolation


@dataclass(frozen=True, eq=False)
class EpisodeResult:
    task_id: int
    seed: int
    success: bool
    steps: int
    actions: np.ndarray      # (T, A) executed actions
    positions: np.ndarray    # (T + 1, 2) agent positions


def _results(states, seeds, successes, actions, positions):
    return [
        EpisodeResult(
            task_id=s.task.task_id,
            seed=seed,
            success=ok,
            steps=len(acts),
            actions=np.asarray(acts, dtype=np.float64).reshape(-1, ACTION_DIM),
            positions=np.asarray(pos, dtype=np.float64),
        )
        for s, seed, ok, acts, pos in zip(states, seeds, successes, actions, positions)
    ]


def _run(actor, states, observations, seeds, choose):
    n = len(states)
    actor.begin(states, observations)
    done = [False] * n
    successes = [False] * n
    actions = [[] for _ in range(n)]
    positions = [[s.agent_pos.copy()] for s in states]
    states, observations = list(states), list(observations)
    while not all(done):
        active = [i for i in range(n) if not done[i]]
        picked = choose(active, states, observations)
        for i, action in zip(active, picked):
            states[i], observations[i], ok, finished = envlib.step(states[i], action)
            actions[i].append(np.clip(action, -1.0, 1.0))
            positions[i].append(states[i].agent_pos.copy())
            successes[i], done[i] = ok, finished
    return _results(states, seeds, successes, actions, positions)


def ensembled_exec(actor, states, observations, seeds, chunk_len, m):
    """Query the actor every step and execute the temporally ensembled action

    Args:
        actor: Object with begin(states, observations) and predict(indices, states, observations) -> (k, H*A)
        states, observations: Initial EnvStates and Observations (one per environment)
        seeds: Reset seed of each environment (recorded in the results)
        chunk_len: H
        m: Ensemble smoothing coefficient

    Returns:
        list: EpisodeResult per environment
    """
    buffers = [EnsembleBuffer(chunk_len, ACTION_DIM, m) for _ in states]

    def choose(active, states, observations):
        chunks = actor.predict(active, [states[i] for i in active], [observations[i] for i in active])
        picked = []
        for i, chunk in zip(active, chunks):
            action, buffers[i] = ensemble_step(buffers[i], chunk)
            picked.append(action)
        return picked

    return _run(actor, states, observations, seeds, choose)


def naive_chunk_exec(actor, states, observations, seeds, chunk_len):
    """Query the actor once every H steps and execute each chunk open-loop."""
    if chunk_len < 1:
        raise ContractViolation(f"Chunk length must be >= 1, got {chunk_len}")
    current = [None] * len(states)
    offset = [0] * len(states)

    def choose(active, states, observations):
        query = [i for i in active if current[i] is None or offset[i] >= chunk_len]
        if query:
            chunks = actor.predict(query, [states[i] for i in query], [observations[i] for i in query])
            for i, chunk in zip(query, chunks):
                current[i] = np.asarray(chunk, dtype=np.float64).reshape(chunk_len, ACTION_DIM)
                offset[i] = 0
        picked = []
        for i in active:
            picked.append(current[i][offset[i]])
            offset[i] += 1
        return picked

    return _run(actor, states, observations, seeds, choose)


def reset_batch(suite, task_id, seeds, bimodal=False):
    """Seeded resets of one task, one per seed."""
    task = suite.task(task_id)
    pairs = [envlib.reset(task, seed, suite.image_size, suite.views, bimodal) for seed in seeds]
    return [p[0] for p in pairs], [p[1] for p in pairs]
