"""Chunk-producing actors: trained policy, scripted expert, random baseline

Every actor has begin(states, observations) and
predict(indices, states, observations) -> (k, H*A) array, so evaluation and
deployment loops accept any of them.
"""

from collections import deque

import numpy as np

from ..config.config import ACTION_DIM
from ..dataio.demos import records_for_task
from ..envsuite.env import step as env_step
from ..envsuite.expert import expert_action
from ..nkernel.rng import make_stream, torch_generator
from ..utils.errors import ContractViolation


class PolicyActor:
    """Runs a ChunkPolicy on observation windows of its history length.

    Windows shorter than h at the start of an episode are left-padded with the
    first observation, matching the padding used for training batches. Image
    goals come from a demonstration of the same task.
    """

    def __init__(self, policy, demos=None, deterministic=True, zero_goal=False, seed=0):
        self.policy = policy
        self.config = policy.config
        self.chunk_len = policy.chunk_len
        self.ensemble_m = policy.config.ensemble_m
        self.deterministic = deterministic
        self.zero_goal = zero_goal
        self.seed = seed
        self.demos = demos
        if self.config.goal_mode != "text" and demos is None:
            raise ContractViolation(f"goal_mode '{self.config.goal_mode}' needs demos to draw goal images from")
        self._calls = 0
        self.history = []
        self.goal_records = []

    def begin(self, states, observations):
        h = self.config.history
        self.history = [deque(maxlen=h) for _ in states]
        self.goal_records = []
        if self.config.goal_mode != "text":
            for i, state in enumerate(states):
                records = records_for_task(self.demos, state.task.task_id)
                if not records:
                    raise ContractViolation(f"No demonstration of task {state.task.task_id} for goal images")
                pick = int(make_stream(self.seed, "goal", state.task.task_id, i).integers(len(records)))
                self.goal_records.append(records[pick])

    def _window(self, i):
        frames = list(self.history[i])
        return [frames[0]] * (self.config.history - len(frames)) + frames

    def _goal_images(self, i, state):
        record = self.goal_records[i]
        scene = record.views[self.policy.views[0]]
        h = self.config.history
        if self.config.goal_mode == "goal_image":
            return np.repeat(scene[-1][None], h, axis=0)
        steps = np.maximum(state.step_count + np.arange(-h + 1, 1), 0)
        return scene[np.minimum(steps + self.config.k_goal, record.length - 1)]

    def predict(self, indices, states, observations):
        for i, obs in zip(indices, observations):
            self.history[i].append(obs)
        windows = [self._window(i) for i in indices]
        views = {v: np.stack([[o.views[v] for o in w] for w in windows]) for v in self.policy.views}
        proprio = np.stack([[o.proprio for o in w] for w in windows])
        task_ids = np.array([s.task.task_id for s in states], dtype=np.int64)
        goals = None
        if self.config.goal_mode != "text":
            goals = np.stack([self._goal_images(i, s) for i, s in zip(indices, states)])
        generator = None if self.deterministic else torch_generator(self.seed, "sample", self._calls)
        self._calls += 1
        chunk = self.policy.predict_chunk(
            views, proprio, task_ids, goals, generator=generator, deterministic=self.deterministic,
            zero_goal=self.zero_goal,
        )
        return chunk.detach().cpu().numpy().astype(np.float64)


class ExpertActor:
    """Scripted expert rolled H steps ahead, so its chunks are exactly what it would do open-loop."""

    def __init__(self, chunk_len):
        self.chunk_len = chunk_len
        self.ensemble_m = 0.0

    def begin(self, states, observations):
        pass

    def predict(self, indices, states, observations):
        chunks = []
        for state in states:
            actions = []
            for _ in range(self.chunk_len):
                action = expert_action(state)
                actions.append(action)
                state = env_step(state, action, observe_next=False)[0]
            chunks.append(np.concatenate(actions))
        return np.stack(chunks)


class RandomActor:
    """Uniform random chunks in [-1, 1]."""

    def __init__(self, chunk_len, seed=0):
        self.chunk_len = chunk_len
        self.ensemble_m = 0.0
        self.seed = seed
        self._calls = 0

    def begin(self, states, observations):
        pass

    def predict(self, indices, states, observations):
        rng = make_stream(self.seed, "random_actor", self._calls)
        self._calls += 1
        return rng.uniform(-1.0, 1.0, size=(len(indices), self.chunk_len * ACTION_DIM))